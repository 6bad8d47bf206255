#include "grouprobe/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "grouprobe/rng.hpp"

namespace grouprobe {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, int row, const std::string& col) {
  const std::string s = trim(raw);
  if (s.empty()) {
    throw DataError("empty cell at row " + std::to_string(row) + ", column " + col);
  }
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (*begin == '+') ++begin;  // from_chars rejects an explicit plus sign
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("non-numeric cell '" + s + "' at row " + std::to_string(row) +
                    ", column " + col);
  }
  if (!std::isfinite(value)) {
    throw DataError("non-finite value at row " + std::to_string(row) + ", column " + col);
  }
  return value;
}

// Raw labels may be {-1,+1}, {0,1}, or class ids 0..K-1.
std::vector<int> normalize_labels(const std::vector<double>& raw, int& n_classes) {
  std::vector<int> out(raw.size());
  bool any_negative = false;
  int max_label = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i];
    if (v != std::floor(v)) {
      throw DataError("label at row " + std::to_string(i + 1) + " is not an integer");
    }
    const int iv = static_cast<int>(v);
    if (iv < 0) any_negative = true;
    max_label = std::max(max_label, iv);
    out[i] = iv;
  }
  if (any_negative) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] == -1) {
        out[i] = 0;
      } else if (out[i] == 1) {
        out[i] = 1;
      } else {
        throw DataError("negative labels must be the binary -1/+1 convention (row " +
                        std::to_string(i + 1) + ")");
      }
    }
    n_classes = 2;
  } else {
    n_classes = std::max(2, max_label + 1);
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (n() < 1) throw DataError("empty dataset");
  if (d() < 1) throw DataError("no feature columns");
  if (n_classes < 2) throw DataError("need at least two classes");
  if (static_cast<int>(labels.size()) != n()) throw DataError("label count mismatch");
  if (static_cast<int>(base_weights.size()) != n()) throw DataError("base weight count mismatch");
  for (int i = 0; i < n(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= n_classes) {
      throw DataError("label out of range at row " + std::to_string(i));
    }
    if (!(base_weights[i] >= 0.0) || !std::isfinite(base_weights[i])) {
      throw DataError("invalid base weight at row " + std::to_string(i));
    }
    for (int j = 0; j < d(); ++j) {
      if (!std::isfinite(features(i, j))) {
        throw DataError("non-finite feature at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
    }
  }
  if (!(base_weights.maxCoeff() > 0.0)) {
    throw DataError("all base weights are zero");
  }
}

std::uint64_t Dataset::fingerprint() const {
  // FNV-1a over the raw bytes of shape, labels, weights, and features.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int rows = n(), cols = d();
  mix_bytes(&rows, sizeof(rows));
  mix_bytes(&cols, sizeof(cols));
  mix_bytes(&n_classes, sizeof(n_classes));
  mix_bytes(labels.data(), labels.size() * sizeof(int));
  mix_bytes(base_weights.data(), static_cast<std::size_t>(base_weights.size()) * sizeof(double));
  mix_bytes(features.data(), static_cast<std::size_t>(features.size()) * sizeof(double));
  return h;
}

Dataset load_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("empty dataset");
  const std::vector<std::string> header = split_csv_line(header_line);

  int label_col = -1, weight_col = -1;
  std::vector<int> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (name == "label") {
      if (label_col >= 0) throw DataError("duplicate label column");
      label_col = static_cast<int>(c);
    } else if (name == "weight") {
      if (weight_col >= 0) throw DataError("duplicate weight column");
      weight_col = static_cast<int>(c);
    } else {
      feature_cols.push_back(static_cast<int>(c));
      names.push_back(name);
    }
  }
  if (label_col < 0) throw DataError("missing label column");
  if (feature_cols.empty()) throw DataError("no feature columns");

  std::vector<double> raw_labels;
  std::vector<double> weights;
  std::vector<double> values;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("ragged row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    raw_labels.push_back(parse_cell(cells[static_cast<std::size_t>(label_col)], row, "label"));
    if (weight_col >= 0) {
      weights.push_back(parse_cell(cells[static_cast<std::size_t>(weight_col)], row, "weight"));
    }
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      values.push_back(
          parse_cell(cells[static_cast<std::size_t>(feature_cols[k])], row, names[k]));
    }
  }
  if (row == 0) throw DataError("empty dataset");

  Dataset data;
  const int n = row;
  const int d = static_cast<int>(feature_cols.size());
  data.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      data.features(i, j) = values[static_cast<std::size_t>(i) * d + j];
  data.labels = normalize_labels(raw_labels, data.n_classes);
  data.base_weights = VectorXd::Ones(n);
  if (weight_col >= 0) {
    for (int i = 0; i < n; ++i) data.base_weights[i] = weights[static_cast<std::size_t>(i)];
  }
  data.feature_names = names;
  data.validate();
  return data;
}

void write_dense_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  const bool default_weights = (data.base_weights.array() == 1.0).all();
  for (int j = 0; j < data.d(); ++j) {
    const std::string name = (static_cast<std::size_t>(j) < data.feature_names.size() &&
                              !data.feature_names[static_cast<std::size_t>(j)].empty())
                                 ? data.feature_names[static_cast<std::size_t>(j)]
                                 : "f" + std::to_string(j);
    out << name << ',';
  }
  if (!default_weights) out << "weight,";
  out << "label\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) out << format_double(data.features(i, j)) << ',';
    if (!default_weights) out << format_double(data.base_weights[i]) << ',';
    out << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

Dataset load_sparse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  struct Entry {
    int index;  // 0-based
    double value;
  };
  std::vector<double> raw_labels;
  std::vector<std::vector<Entry>> rows;
  int max_index = 0;

  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) throw DataError("missing label at row " + std::to_string(row));
    raw_labels.push_back(parse_cell(token, row, "label"));
    std::vector<Entry> entries;
    int prev_index = 0;
    while (ls >> token) {
      const std::size_t colon = token.find(':');
      if (colon == std::string::npos) {
        throw DataError("unparseable token '" + token + "' at row " + std::to_string(row));
      }
      int idx = 0;
      {
        const std::string is = token.substr(0, colon);
        auto [p, ec] = std::from_chars(is.data(), is.data() + is.size(), idx);
        if (ec != std::errc() || p != is.data() + is.size()) {
          throw DataError("unparseable index '" + is + "' at row " + std::to_string(row));
        }
      }
      if (idx < 1) throw DataError("index < 1 at row " + std::to_string(row));
      if (idx <= prev_index) {
        throw DataError("indices not ascending at row " + std::to_string(row));
      }
      prev_index = idx;
      const double value = parse_cell(token.substr(colon + 1), row, "idx " + std::to_string(idx));
      entries.push_back({idx - 1, value});
      max_index = std::max(max_index, idx);
    }
    rows.push_back(std::move(entries));
  }
  if (row == 0) throw DataError("empty dataset");
  if (max_index == 0) throw DataError("no feature columns");

  Dataset data;
  data.features = MatrixRM::Zero(row, max_index);
  for (int i = 0; i < row; ++i) {
    for (const Entry& e : rows[static_cast<std::size_t>(i)]) {
      data.features(i, e.index) = e.value;
    }
  }
  data.labels = normalize_labels(raw_labels, data.n_classes);
  data.base_weights = VectorXd::Ones(row);
  data.validate();
  return data;
}

Dataset synth_gaussian_binary(int n_per_class, int d, double mean_offset,
                              std::uint64_t seed) {
  if (n_per_class < 1) throw DataError("n_per_class must be >= 1");
  if (d < 1) throw DataError("dimension must be >= 1");
  Rng rng(seed);
  const int n = 2 * n_per_class;
  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(static_cast<std::size_t>(n));
  data.base_weights = VectorXd::Ones(n);
  data.n_classes = 2;
  for (int i = 0; i < n; ++i) {
    const int cls = i < n_per_class ? 0 : 1;
    const double sign = cls == 0 ? -1.0 : 1.0;
    data.labels[static_cast<std::size_t>(i)] = cls;
    for (int j = 0; j < d; ++j) {
      data.features(i, j) = rng.normal() + (j == 0 ? sign * mean_offset : 0.0);
    }
  }
  return data;
}

}  // namespace grouprobe
