#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectrain/matrix.hpp"
#include "spectrain/network.hpp"

namespace spectrain {

// Absolute top-singular-value threshold below which a layer's activation
// matrix counts as dead (normalizing its spectrum would divide by ~0).
inline constexpr double kDeadLayerEps = 1e-12;

// Sorted spectrum of one hidden layer's activation matrix at one epoch,
// normalized so the leading value is 1. Length always equals the layer
// width; a wide layer (more units than probe rows) is zero-padded.
struct LayerSpectrum {
  std::size_t layer = 0;
  std::size_t epoch = 0;
  std::vector<double> values;
  bool degenerate = false;
};

// Per-epoch spectra for every hidden layer over a rolling window of the
// most recent window_length + 1 epochs.
class SpectrumHistory {
 public:
  explicit SpectrumHistory(std::size_t window_length) : window_(window_length) {
    if (window_length < 2) {
      throw std::invalid_argument("SpectrumHistory: window length must be >= 2");
    }
  }

  std::size_t window_length() const { return window_; }
  std::size_t capacity() const { return window_ + 1; }
  std::size_t stored_epochs() const { return epochs_.size(); }
  bool empty() const { return epochs_.empty(); }

  std::size_t num_layers() const {
    return epochs_.empty() ? 0 : epochs_.front().size();
  }

  void push(std::vector<LayerSpectrum> spectra, std::size_t epoch) {
    if (spectra.empty()) throw std::invalid_argument("SpectrumHistory: no spectra");
    if (!epochs_.empty()) {
      if (epoch != latest_epoch_ + 1) {
        throw std::invalid_argument("SpectrumHistory: epoch " + std::to_string(epoch) +
                                    " does not follow " + std::to_string(latest_epoch_));
      }
      if (spectra.size() != epochs_.front().size()) {
        throw std::invalid_argument("SpectrumHistory: layer count changed");
      }
    }
    epochs_.push_back(std::move(spectra));
    latest_epoch_ = epoch;
    while (epochs_.size() > capacity()) epochs_.pop_front();
  }

  // True iff epochs t - window ... t are all stored.
  bool window_ready(std::size_t t) const {
    if (epochs_.empty() || latest_epoch_ != t) return false;
    return epochs_.size() == capacity();
  }

  // Spectrum of `layer` at absolute epoch t (must be within the window).
  const LayerSpectrum& at(std::size_t layer, std::size_t t) const {
    if (epochs_.empty() || t > latest_epoch_ ||
        latest_epoch_ - t >= epochs_.size()) {
      throw std::out_of_range("SpectrumHistory: epoch " + std::to_string(t) +
                              " not in buffer");
    }
    const auto& per_layer = epochs_[epochs_.size() - 1 - (latest_epoch_ - t)];
    return per_layer.at(layer);
  }

  std::size_t latest_epoch() const {
    if (epochs_.empty()) throw std::out_of_range("SpectrumHistory: empty");
    return latest_epoch_;
  }

 private:
  std::size_t window_;
  std::size_t latest_epoch_ = 0;
  std::deque<std::vector<LayerSpectrum>> epochs_;
};

// Runs the probe data through the network and extracts each hidden layer's
// normalized singular spectrum. Labels never enter here.
inline std::vector<LayerSpectrum> capture_spectra(const MlpParams& params,
                                                  const Matrix& x_val, std::size_t epoch) {
  ForwardResult fwd = forward(params, x_val);
  std::vector<LayerSpectrum> out;
  out.reserve(fwd.hidden.size());
  for (std::size_t l = 0; l < fwd.hidden.size(); ++l) {
    const Matrix& act = fwd.hidden[l];
    LayerSpectrum spec;
    spec.layer = l;
    spec.epoch = epoch;
    std::vector<double> sv = singular_values(act);
    sv.resize(act.cols(), 0.0);  // zero-pad when probe rows < layer width
    if (sv[0] < kDeadLayerEps) {
      spec.degenerate = true;
      spec.values.assign(act.cols(), 0.0);
    } else {
      const double top = sv[0];
      for (double& v : sv) v /= top;
      sv[0] = 1.0;
      spec.values = std::move(sv);
    }
    out.push_back(std::move(spec));
  }
  return out;
}

// Optional dump for external re-plotting: epoch, layer, rank, value rows.
inline void append_spectrum_csv(std::ofstream& out, const std::vector<LayerSpectrum>& spectra) {
  char buf[32];
  for (const auto& spec : spectra) {
    for (std::size_t rank = 0; rank < spec.values.size(); ++rank) {
      std::snprintf(buf, sizeof(buf), "%.17g", spec.values[rank]);
      out << spec.epoch << ',' << spec.layer << ',' << rank << ',' << buf << '\n';
    }
  }
}

inline constexpr const char* kSpectrumCsvHeader = "epoch,layer,rank,value";

}  // namespace spectrain
