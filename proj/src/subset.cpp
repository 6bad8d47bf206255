#include "grouprobe/subset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace grouprobe {

SubsetWeights SubsetWeights::from_indices(std::vector<int> idx, const Dataset& data,
                                          std::string tag, int id) {
  std::vector<double> ones(idx.size(), 1.0);
  return from_weighted(std::move(idx), std::move(ones), data, std::move(tag), id);
}

SubsetWeights SubsetWeights::from_weighted(std::vector<int> idx, std::vector<double> w,
                                           const Dataset& data, std::string tag, int id) {
  if (idx.size() != w.size()) throw InternalError("subset index/value length mismatch");
  SubsetWeights subset;
  subset.id = id;
  subset.method_tag = std::move(tag);
  // Canonical ascending order regardless of construction order.
  std::vector<std::size_t> order(idx.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&idx](std::size_t a, std::size_t b) { return idx[a] < idx[b]; });
  subset.indices.reserve(idx.size());
  subset.values.reserve(idx.size());
  for (std::size_t o : order) {
    subset.indices.push_back(idx[o]);
    subset.values.push_back(w[o]);
  }
  subset.validate(data);
  const double total = data.total_base_weight();
  subset.alpha = total > 0.0 ? subset.removed_mass(data) / total : 0.0;
  return subset;
}

bool SubsetWeights::binary() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 1.0; });
}

double SubsetWeights::removed_mass(const Dataset& data) const {
  double mass = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    mass += values[k] * data.base_weights[indices[k]];
  }
  return mass;
}

double SubsetWeights::weight_sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

VectorXd SubsetWeights::dense(int n) const {
  VectorXd w = VectorXd::Zero(n);
  for (std::size_t k = 0; k < indices.size(); ++k) w[indices[k]] = values[k];
  return w;
}

VectorXd SubsetWeights::keep_vector(int n) const {
  VectorXd keep = VectorXd::Ones(n);
  for (std::size_t k = 0; k < indices.size(); ++k) keep[indices[k]] -= values[k];
  return keep;
}

SubsetWeights SubsetWeights::scaled(double factor) const {
  SubsetWeights out = *this;
  for (double& v : out.values) v *= factor;
  out.alpha *= factor;
  return out;
}

void SubsetWeights::validate(const Dataset& data) const {
  int prev = -1;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int i = indices[k];
    if (i <= prev) throw InternalError("subset indices not strictly ascending");
    if (i < 0 || i >= data.n()) throw DataError("subset index out of range");
    const double v = values[k];
    if (!std::isfinite(v) || v <= 0.0 || v > 1.0) {
      throw DataError("subset weight out of (0,1] at index " + std::to_string(i));
    }
    prev = i;
  }
}

EvalFunction EvalFunction::test_prediction(VectorXd x) {
  EvalFunction f;
  f.kind = Kind::TestPrediction;
  f.x_test = std::move(x);
  return f;
}

EvalFunction EvalFunction::test_loss(VectorXd x, int y) {
  EvalFunction f;
  f.kind = Kind::TestLoss;
  f.x_test = std::move(x);
  f.y_test = y;
  return f;
}

EvalFunction EvalFunction::self_loss() {
  EvalFunction f;
  f.kind = Kind::SelfLoss;
  return f;
}

const char* EvalFunction::kind_name() const {
  switch (kind) {
    case Kind::TestPrediction: return "test_prediction";
    case Kind::TestLoss: return "test_loss";
    case Kind::SelfLoss: return "self_loss";
  }
  return "?";
}

EvalFunction::Kind EvalFunction::kind_from_name(const std::string& name) {
  if (name == "test_prediction") return Kind::TestPrediction;
  if (name == "test_loss") return Kind::TestLoss;
  if (name == "self_loss") return Kind::SelfLoss;
  throw ConfigError("unknown eval kind '" + name + "'");
}

namespace {

// Test vector with the intercept slot appended when the model has one.
VectorXd augmented_test(const TrainedModel& model, const VectorXd& x) {
  if (!model.intercept) return x;
  VectorXd xa(x.size() + 1);
  xa.head(x.size()) = x;
  xa[x.size()] = 1.0;
  return xa;
}

Dataset test_point_as_dataset(const TrainedModel& model, const EvalFunction& f) {
  Dataset single;
  single.features.resize(1, f.x_test.size());
  single.features.row(0) = f.x_test.transpose();
  single.labels = {f.y_test.value()};
  single.base_weights = VectorXd::Ones(1);
  single.n_classes = model.n_classes;
  return single;
}

}  // namespace

void check_eval_function(const TrainedModel& model, const Dataset& data,
                         const EvalFunction& f) {
  switch (f.kind) {
    case EvalFunction::Kind::TestPrediction:
      if (!model.binary()) {
        throw ConfigError("test_prediction is only defined for binary models");
      }
      if (f.x_test.size() != data.d()) throw DataError("test point dimension mismatch");
      break;
    case EvalFunction::Kind::TestLoss:
      if (f.x_test.size() != data.d()) throw DataError("test point dimension mismatch");
      if (!f.y_test.has_value()) throw ConfigError("test_loss requires a test label");
      if (*f.y_test < 0 || *f.y_test >= model.n_classes) {
        throw DataError("test label out of range");
      }
      break;
    case EvalFunction::Kind::SelfLoss:
      break;
  }
}

double eval_value(const TrainedModel& model, const Dataset& data,
                  const EvalFunction& f, const VectorXd& theta,
                  const SubsetWeights* self_subset) {
  switch (f.kind) {
    case EvalFunction::Kind::TestPrediction:
      return augmented_test(model, f.x_test).dot(theta);
    case EvalFunction::Kind::TestLoss: {
      const Dataset single = test_point_as_dataset(model, f);
      return point_loss_at(model, single, 0, theta);
    }
    case EvalFunction::Kind::SelfLoss: {
      if (self_subset == nullptr) throw InternalError("self-loss requires a subset");
      double total = 0.0;
      for (std::size_t k = 0; k < self_subset->indices.size(); ++k) {
        const int i = self_subset->indices[k];
        total += self_subset->values[k] * data.base_weights[i] *
                 point_loss_at(model, data, i, theta);
      }
      return total;
    }
  }
  throw InternalError("unknown eval kind");
}

VectorXd eval_grad(const TrainedModel& model, const Dataset& data,
                   const EvalFunction& f, const VectorXd& theta,
                   const SubsetWeights* self_subset) {
  switch (f.kind) {
    case EvalFunction::Kind::TestPrediction:
      return augmented_test(model, f.x_test);
    case EvalFunction::Kind::TestLoss: {
      const Dataset single = test_point_as_dataset(model, f);
      return point_grad_at(model, single, 0, theta);
    }
    case EvalFunction::Kind::SelfLoss: {
      if (self_subset == nullptr) throw InternalError("self-loss requires a subset");
      VectorXd g = VectorXd::Zero(model.param_dim());
      for (std::size_t k = 0; k < self_subset->indices.size(); ++k) {
        const int i = self_subset->indices[k];
        g += self_subset->values[k] * data.base_weights[i] *
             point_grad_at(model, data, i, theta);
      }
      return g;
    }
  }
  throw InternalError("unknown eval kind");
}

std::string effects_csv_header() {
  return "subset_id,method_tag,size,alpha,eval_kind,influence,newton,actual,"
         "param_pred,err_nt_act,err_nt_inf";
}

namespace {

std::string opt_cell(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string();
}

std::optional<double> parse_opt_cell(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

void write_effects_csv(const std::string& path, const std::vector<EffectRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << effects_csv_header() << '\n';
  for (const EffectRecord& r : records) {
    out << r.subset_id << ',' << r.method_tag << ',' << r.size << ','
        << format_double(r.alpha) << ',' << r.eval_kind << ','
        << opt_cell(r.influence) << ',' << opt_cell(r.newton) << ','
        << opt_cell(r.actual) << ',' << opt_cell(r.param_pred) << ','
        << opt_cell(r.err_nt_act) << ',' << opt_cell(r.err_nt_inf) << '\n';
  }
}

std::vector<EffectRecord> read_effects_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty effects file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != effects_csv_header()) {
    throw DataError("not an effects CSV: unexpected header in " + path);
  }
  std::vector<EffectRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 11) cells.emplace_back();
    EffectRecord r;
    r.subset_id = std::stoi(cells[0]);
    r.method_tag = cells[1];
    r.size = std::stoi(cells[2]);
    r.alpha = std::stod(cells[3]);
    r.eval_kind = cells[4];
    r.influence = parse_opt_cell(cells[5]);
    r.newton = parse_opt_cell(cells[6]);
    r.actual = parse_opt_cell(cells[7]);
    r.param_pred = parse_opt_cell(cells[8]);
    r.err_nt_act = parse_opt_cell(cells[9]);
    r.err_nt_inf = parse_opt_cell(cells[10]);
    records.push_back(std::move(r));
  }
  return records;
}

void write_groups_jsonl(const std::string& path, const std::vector<SubsetWeights>& groups) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  for (const SubsetWeights& g : groups) {
    nlohmann::ordered_json j;
    j["id"] = g.id;
    j["method_tag"] = g.method_tag;
    j["size"] = g.support_size();
    j["indices"] = g.indices;
    if (!g.binary()) j["weights"] = g.values;
    out << j.dump() << '\n';
  }
}

std::vector<SubsetWeights> read_groups_jsonl(const std::string& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<SubsetWeights> groups;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    auto idx = j.at("indices").get<std::vector<int>>();
    std::vector<double> w = j.contains("weights")
                                ? j["weights"].get<std::vector<double>>()
                                : std::vector<double>(idx.size(), 1.0);
    groups.push_back(SubsetWeights::from_weighted(std::move(idx), std::move(w), data,
                                                  j.value("method_tag", std::string()),
                                                  j.value("id", -1)));
  }
  return groups;
}

}  // namespace grouprobe
