#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spectrain/matrix.hpp"
#include "spectrain/rng.hpp"

namespace spectrain {

// How a dataset came to be; echoed into every report.
struct Provenance {
  std::string generator;  // "shell" or "csv"
  std::size_t dim = 0;
  double r1 = 0.0;
  double r2 = 0.0;
  std::uint64_t seed = 0;
  double shuffle_percent = 0.0;
  std::uint64_t shuffle_seed = 0;
  std::size_t shuffled_count = 0;  // positions redrawn by shuffle_labels
};

struct LabeledDataset {
  Matrix features;          // n x d
  std::vector<int> labels;  // values in [0, num_classes)
  int num_classes = 0;
  Provenance provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  void validate() const {
    if (labels.size() != features.rows()) {
      throw std::invalid_argument("LabeledDataset: label count != feature rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) {
        throw std::invalid_argument("LabeledDataset: label out of range at row " +
                                    std::to_string(i));
      }
    }
  }
};

// Two concentric spheres in R^d: class 0 on radius r1, class 1 on radius r2,
// exactly half of each split per class. Points are standard Gaussians
// rescaled onto the target sphere (isotropic on the sphere).
inline std::pair<LabeledDataset, LabeledDataset> generate_shell(
    std::size_t d, std::size_t n_train, std::size_t n_val, double r1, double r2,
    std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("generate_shell: dimension must be >= 2");
  if (n_train == 0 || n_train % 2 != 0 || n_val == 0 || n_val % 2 != 0) {
    throw std::invalid_argument("generate_shell: split sizes must be positive and even");
  }
  if (!(0.0 < r1 && r1 < r2)) {
    throw std::invalid_argument("generate_shell: radii must satisfy 0 < r1 < r2");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto make_split = [&](std::size_t n) {
    LabeledDataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.num_classes = 2;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = i < n / 2 ? 0 : 1;
      const double radius = label == 0 ? r1 : r2;
      auto row = ds.features.row(i);
      double norm_sq = 0.0;
      do {
        norm_sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          row[j] = gauss(rng);
          norm_sq += row[j] * row[j];
        }
      } while (norm_sq == 0.0);
      const double scale = radius / std::sqrt(norm_sq);
      for (std::size_t j = 0; j < d; ++j) row[j] *= scale;
      ds.labels[i] = label;
    }
    ds.provenance = {"shell", d, r1, r2, seed, 0.0, 0, 0};
    return ds;
  };

  LabeledDataset train = make_split(n_train);
  LabeledDataset val = make_split(n_val);
  return {std::move(train), std::move(val)};
}

// Picks floor(y_percent/100 * n) positions uniformly without replacement and
// redraws each picked label uniformly from [0, k). A redraw may reproduce
// the original label; provenance records how many positions were eligible.
inline LabeledDataset shuffle_labels(const LabeledDataset& ds, double y_percent,
                                     std::uint64_t seed) {
  if (!(y_percent >= 0.0 && y_percent <= 100.0)) {
    throw std::invalid_argument("shuffle_labels: percent must be in [0, 100]");
  }
  LabeledDataset out = ds;
  const std::size_t n = ds.size();
  const std::size_t count = static_cast<std::size_t>(y_percent / 100.0 * n);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::uniform_int_distribution<int> cls(0, ds.num_classes - 1);
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[idx[i]] = cls(rng);
  }
  out.provenance.shuffle_percent = y_percent;
  out.provenance.shuffle_seed = seed;
  out.provenance.shuffled_count = count;
  return out;
}

// Mini-batch recipe: the per-epoch visiting order is a fresh permutation
// fully determined by (epoch_seed_base, epoch).
struct BatchSchedule {
  std::size_t batch_size = 32;
  std::uint64_t epoch_seed_base = 0;

  std::vector<std::size_t> epoch_order(std::size_t n, std::size_t epoch) const {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(epoch_seed_base, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }
};

struct Batch {
  Matrix features;
  std::vector<int> labels;
};

// Splits the epoch permutation into consecutive blocks; the last block may
// be smaller. Every sample appears exactly once.
inline std::vector<Batch> batches(const LabeledDataset& ds, const BatchSchedule& schedule,
                                  std::size_t epoch) {
  if (schedule.batch_size == 0 || schedule.batch_size > ds.size()) {
    throw std::invalid_argument("batches: batch size must be in [1, n]");
  }
  const std::vector<std::size_t> order = schedule.epoch_order(ds.size(), epoch);
  std::vector<Batch> out;
  const std::size_t d = ds.dim();
  for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
    const std::size_t stop = std::min(start + schedule.batch_size, order.size());
    Batch b;
    b.features = Matrix(stop - start, d);
    b.labels.resize(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      const std::size_t src = order[i];
      auto dst = b.features.row(i - start);
      auto from = ds.features.row(src);
      std::copy(from.begin(), from.end(), dst.begin());
      b.labels[i - start] = ds.labels[src];
    }
    out.push_back(std::move(b));
  }
  return out;
}

// CSV layout: one sample per line, d feature fields then one integer label,
// comma separated, '.' decimal point. A header line is optional on import
// and skipped when the first field does not parse as a number.
inline void export_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_csv: cannot open " + path);
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      out << buf << ',';
    }
    out << ds.labels[i] << '\n';
  }
  if (!out) throw std::runtime_error("export_csv: write failed for " + path);
}

inline LabeledDataset import_csv(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_csv: cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 2) {
      throw std::runtime_error("import_csv: row " + std::to_string(line_no) +
                               ": expected features plus label");
    }

    std::vector<double> feats(fields.size() - 1);
    bool numeric = true;
    for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
      try {
        std::size_t pos = 0;
        feats[j] = std::stod(fields[j], &pos);
        if (pos != fields[j].size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (rows.empty() && labels.empty() && line_no == 1) continue;  // header line
      throw std::runtime_error("import_csv: row " + std::to_string(line_no) +
                               ": malformed feature field");
    }
    int label = 0;
    try {
      std::size_t pos = 0;
      label = std::stoi(fields.back(), &pos);
      if (pos != fields.back().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error("import_csv: row " + std::to_string(line_no) +
                               ": malformed label field");
    }
    if (label < 0 || label >= num_classes) {
      throw std::runtime_error("import_csv: row " + std::to_string(line_no) + ": label " +
                               std::to_string(label) + " outside [0, " +
                               std::to_string(num_classes) + ")");
    }
    if (!rows.empty() && feats.size() != rows.front().size()) {
      throw std::runtime_error("import_csv: row " + std::to_string(line_no) +
                               ": inconsistent column count");
    }
    rows.push_back(std::move(feats));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("import_csv: no samples in " + path);

  LabeledDataset ds;
  ds.features = Matrix::from_rows(rows);
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  ds.provenance.generator = "csv";
  ds.provenance.dim = ds.features.cols();
  return ds;
}

}  // namespace spectrain
