#include "fibril/config.hpp"

#include "fibril/error.hpp"
#include "fibril/io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fibril {

using nlohmann::ordered_json;

namespace {

// Typed reader over one JSON object that rejects keys it does not know.
class Section {
 public:
  Section(const ordered_json& j, std::string path, std::set<std::string> keys) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(label() + " must be an object");
    for (const auto& [k, v] : j.items()) {
      if (!keys.count(k)) throw ConfigError("unknown key '" + k + "' in " + label());
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const ordered_json& at(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(child(key) + " has the wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "the top level" : "section '" + path_ + "'"; }
  const ordered_json& j_;
  std::string path_;
};

template <typename E, typename F>
void get_enum(const Section& s, const char* key, E& out, F&& from_string) {
  std::string name;
  s.get(key, name);
  if (name.empty()) return;
  try {
    out = from_string(name);
  } catch (const std::exception& e) {
    throw ConfigError(s.child(key) + ": " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::string_view to_string(RetrainMode m) { return m == RetrainMode::fresh ? "fresh" : "warm"; }

RetrainMode retrain_mode_from_string(const std::string& s) {
  if (s == "fresh") return RetrainMode::fresh;
  if (s == "warm") return RetrainMode::warm;
  throw ConfigError("unknown retrain mode '" + s + "' (fresh, warm)");
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (adam, sgd)");
}

void read_mlp(const Section& s, TrainConfig& t) {
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  get_enum(s, "optimizer", t.optimizer, optimizer_from_string);
  s.get("learning_rate", t.learning_rate);
  s.get("lr_decay", t.lr_decay);
  s.get("decay_every", t.decay_every);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("epsilon", t.epsilon);
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::string& source) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  RunConfig c;
  const Section top(j, "", {"seed", "output_dir", "threads", "layout", "fibril", "simulate", "dataset", "train", "design"});
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.get("threads", c.threads);

  if (top.has("layout")) {
    const Section s(top.at("layout"), "layout", {"kind", "size", "spacing", "csv"});
    get_enum(s, "kind", c.layout.kind, [](const std::string& n) { return layout_kind_from_string(n); });
    s.get("size", c.layout.size);
    s.get("spacing", c.layout.spacing);
    s.get("csv", c.layout.csv);
  }
  if (top.has("fibril")) {
    const Section s(top.at("fibril"), "fibril", {"length_ratio", "poisson_ratio", "modulus_ratio_raw"});
    s.get("length_ratio", c.fibril.length_ratio);
    s.get("poisson_ratio", c.fibril.poisson_ratio);
    s.get("modulus_ratio_raw", c.fibril.modulus_ratio_raw);
  }
  if (top.has("simulate")) {
    const Section s(top.at("simulate"), "simulate", {"beta_x", "beta_y", "design_csv", "delta_D"});
    s.get("beta_x", c.simulate.beta_x);
    s.get("beta_y", c.simulate.beta_y);
    s.get("design_csv", c.simulate.design_csv);
    s.get("delta_D", c.simulate.delta_D);
  }
  if (top.has("dataset")) {
    const Section s(top.at("dataset"), "dataset",
                    {"n_samples", "mean_compliance", "bounds", "filter_ceiling", "style", "radial_degree", "max_amplitude",
                     "test_fraction", "min_acceptance", "probe_batch"});
    auto& d = c.dataset;
    s.get("n_samples", d.n_samples);
    if (s.has("mean_compliance")) {
      double v = 0;
      s.get("mean_compliance", v);
      d.mean_compliance = v;
    }
    if (s.has("bounds")) {
      std::array<double, 2> b{};
      s.get("bounds", b);
      d.bounds = b;
    }
    s.get("filter_ceiling", d.filter_ceiling);
    get_enum(s, "style", d.style, [](const std::string& n) { return sampling_style_from_string(n); });
    s.get("radial_degree", d.radial_degree);
    s.get("max_amplitude", d.max_amplitude);
    s.get("test_fraction", d.test_fraction);
    s.get("min_acceptance", d.min_acceptance);
    s.get("probe_batch", d.probe_batch);
  }
  if (top.has("train")) {
    const Section s(top.at("train"), "train",
                    {"grid_layers", "grid_widths", "cv_folds", "cv_epochs", "mlp", "validation_fraction", "project_inputs",
                     "rank_tol", "compare_models", "linear_ridge", "polynomial_ridge", "rbf_centers", "rbf_widths",
                     "rbf_ridge", "reference_mlps"});
    auto& t = c.train;
    s.get("grid_layers", t.grid_layers);
    s.get("grid_widths", t.grid_widths);
    s.get("cv_folds", t.cv_folds);
    s.get("cv_epochs", t.cv_epochs);
    if (s.has("mlp")) {
      const Section m(s.at("mlp"), "train.mlp",
                      {"epochs", "batch_size", "optimizer", "learning_rate", "lr_decay", "decay_every", "beta1", "beta2",
                       "epsilon"});
      read_mlp(m, t.mlp);
    }
    s.get("validation_fraction", t.validation_fraction);
    s.get("project_inputs", t.project_inputs);
    s.get("rank_tol", t.rank_tol);
    s.get("compare_models", t.compare_models);
    s.get("linear_ridge", t.linear_ridge);
    s.get("polynomial_ridge", t.polynomial_ridge);
    s.get("rbf_centers", t.rbf_centers);
    s.get("rbf_widths", t.rbf_widths);
    s.get("rbf_ridge", t.rbf_ridge);
    s.get("reference_mlps", t.reference_mlps);
  }
  if (top.has("design")) {
    const Section s(top.at("design"), "design",
                    {"n_starts", "max_iters", "step_size", "max_halvings", "tolerance", "window", "enforce_mean",
                     "init_style", "feedback_rounds", "feedback_k", "retrain", "warm_epochs", "warm_learning_rate",
                     "top_profiles"});
    auto& d = c.design;
    s.get("n_starts", d.n_starts);
    s.get("max_iters", d.max_iters);
    s.get("step_size", d.step_size);
    s.get("max_halvings", d.max_halvings);
    s.get("tolerance", d.tolerance);
    s.get("window", d.window);
    s.get("enforce_mean", d.enforce_mean);
    if (s.has("init_style")) {
      SamplingStyle st{};
      get_enum(s, "init_style", st, [](const std::string& n) { return sampling_style_from_string(n); });
      d.init_style = st;
    }
    s.get("feedback_rounds", d.feedback_rounds);
    s.get("feedback_k", d.feedback_k);
    get_enum(s, "retrain", d.retrain, retrain_mode_from_string);
    s.get("warm_epochs", d.warm_epochs);
    s.get("warm_learning_rate", d.warm_learning_rate);
    s.get("top_profiles", d.top_profiles);
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config(ss.str(), path.string());
  // A custom layout path is taken relative to the config file.
  if (!c.layout.csv.empty() && std::filesystem::path(c.layout.csv).is_relative() && path.has_parent_path()) {
    c.layout.csv = (path.parent_path() / c.layout.csv).lexically_normal().string();
  }
  if (!c.simulate.design_csv.empty() && std::filesystem::path(c.simulate.design_csv).is_relative() &&
      path.has_parent_path()) {
    c.simulate.design_csv = (path.parent_path() / c.simulate.design_csv).lexically_normal().string();
  }
  return c;
}

void validate(const RunConfig& c) {
  require(c.threads >= 1, "threads must be at least 1");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  if (c.layout.csv.empty()) {
    require(c.layout.kind != LayoutKind::custom, "layout.kind 'custom' needs layout.csv");
    require(c.layout.size > 0.0 && std::isfinite(c.layout.size), "layout.size must be positive");
    require(c.layout.spacing >= 2.0, "layout.spacing must be at least 2 (fibrils of unit radius may not overlap)");
  }
  require(c.fibril.length_ratio > 0.0, "fibril.length_ratio must be positive");
  require(c.fibril.modulus_ratio_raw > 0.0, "fibril.modulus_ratio_raw must be positive");
  require(c.fibril.poisson_ratio >= 0.0 && c.fibril.poisson_ratio <= 0.5, "fibril.poisson_ratio must lie in [0, 0.5]");
  require(c.simulate.delta_D >= 0.0, "simulate.delta_D must be non-negative");

  const auto& d = c.dataset;
  require(d.n_samples >= 1, "dataset.n_samples must be at least 1");
  require(d.filter_ceiling > 0.0, "dataset.filter_ceiling must be positive");
  require(d.test_fraction > 0.0 && d.test_fraction < 1.0, "dataset.test_fraction must lie in (0, 1)");
  require(d.radial_degree >= 1, "dataset.radial_degree must be at least 1");
  require(d.max_amplitude >= 0.0 && d.max_amplitude < 1.0, "dataset.max_amplitude must lie in [0, 1)");
  require(d.min_acceptance > 0.0 && d.min_acceptance <= 1.0, "dataset.min_acceptance must lie in (0, 1]");
  require(d.probe_batch >= 1, "dataset.probe_batch must be at least 1");
  if (d.mean_compliance) require(*d.mean_compliance > 0.0, "dataset.mean_compliance must be positive");
  if (d.bounds) {
    const double m = d.mean_compliance ? *d.mean_compliance : 1.0;
    require((*d.bounds)[0] > 0.0 && (*d.bounds)[0] < (*d.bounds)[1], "dataset.bounds must satisfy 0 < lo < hi");
    if (d.mean_compliance) require((*d.bounds)[0] < m && m < (*d.bounds)[1], "dataset.bounds must bracket mean_compliance");
  }

  const auto& t = c.train;
  require(!t.grid_layers.empty() && !t.grid_widths.empty(), "train grid must not be empty");
  for (int l : t.grid_layers) require(l >= 0, "train.grid_layers entries must be non-negative");
  for (int w : t.grid_widths) require(w >= 1, "train.grid_widths entries must be positive");
  require(t.cv_folds >= 2, "train.cv_folds must be at least 2");
  require(t.cv_epochs >= 0 && t.mlp.epochs >= 0, "epochs must be non-negative");
  require(t.mlp.learning_rate > 0.0, "train.mlp.learning_rate must be positive");
  require(t.mlp.lr_decay > 0.0, "train.mlp.lr_decay must be positive");
  require(t.mlp.beta1 >= 0.0 && t.mlp.beta1 < 1.0 && t.mlp.beta2 >= 0.0 && t.mlp.beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(t.validation_fraction >= 0.0 && t.validation_fraction < 1.0, "train.validation_fraction must lie in [0, 1)");
  require(t.rank_tol >= 0.0 && t.rank_tol < 1.0, "train.rank_tol must lie in [0, 1)");
  require(t.linear_ridge >= 0.0 && t.polynomial_ridge >= 0.0 && t.rbf_ridge >= 0.0, "ridge terms must be non-negative");
  require(t.rbf_centers >= 1, "train.rbf_centers must be positive");
  require(!t.rbf_widths.empty(), "train.rbf_widths must not be empty");
  for (double w : t.rbf_widths) require(w > 0.0, "train.rbf_widths entries must be positive");
  for (const auto& r : t.reference_mlps) require(r[0] >= 0 && r[1] >= 1, "train.reference_mlps entries are [layers, width]");

  const auto& g = c.design;
  require(g.n_starts >= 1, "design.n_starts must be at least 1");
  require(g.max_iters >= 0 && g.max_halvings >= 0 && g.window >= 1, "design iteration limits are invalid");
  require(g.step_size > 0.0 && g.tolerance >= 0.0, "design.step_size must be positive and tolerance non-negative");
  require(g.feedback_rounds >= 0 && g.feedback_k >= 0, "design feedback settings must be non-negative");
  require(g.warm_epochs >= 0 && g.warm_learning_rate > 0.0, "design warm retraining settings are invalid");
  require(g.top_profiles >= 1, "design.top_profiles must be at least 1");
}

FibrilSpec fibril_template(const RunConfig& c) {
  ElasticContext ctx{c.fibril.poisson_ratio, c.fibril.modulus_ratio_raw};
  return default_template(ctx, c.fibril.length_ratio);
}

double mean_compliance(const RunConfig& c) {
  return c.dataset.mean_compliance ? *c.dataset.mean_compliance : fibril_compliance(fibril_template(c));
}

FibrilArray build_layout(const RunConfig& c) {
  if (!c.layout.csv.empty()) {
    std::ifstream in(c.layout.csv);
    if (!in) throw ConfigError("cannot read layout file " + c.layout.csv);
    return read_layout_csv(in, c.layout.csv);
  }
  return build_layout(c.layout.kind, c.layout.size, c.layout.spacing, fibril_template(c));
}

namespace {

ordered_json resolved(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["layout"] = {{"kind", std::string(to_string(c.layout.kind))},
                 {"size", c.layout.size},
                 {"spacing", c.layout.spacing},
                 {"csv", c.layout.csv}};
  j["fibril"] = {{"length_ratio", c.fibril.length_ratio},
                 {"poisson_ratio", c.fibril.poisson_ratio},
                 {"modulus_ratio_raw", c.fibril.modulus_ratio_raw}};
  j["simulate"] = {{"beta_x", c.simulate.beta_x},
                   {"beta_y", c.simulate.beta_y},
                   {"design_csv", c.simulate.design_csv},
                   {"delta_D", c.simulate.delta_D}};
  const double m = mean_compliance(c);
  const auto bounds = c.dataset.bounds ? *c.dataset.bounds : std::array<double, 2>{m / 10.0, 10.0 * m};
  const auto& d = c.dataset;
  j["dataset"] = {{"n_samples", d.n_samples},
                  {"mean_compliance", m},
                  {"bounds", bounds},
                  {"filter_ceiling", d.filter_ceiling},
                  {"style", std::string(to_string(d.style))},
                  {"radial_degree", d.radial_degree},
                  {"max_amplitude", d.max_amplitude},
                  {"test_fraction", d.test_fraction},
                  {"min_acceptance", d.min_acceptance},
                  {"probe_batch", d.probe_batch}};
  const auto& t = c.train;
  j["train"] = {{"grid_layers", t.grid_layers},
                {"grid_widths", t.grid_widths},
                {"cv_folds", t.cv_folds},
                {"cv_epochs", t.cv_epochs},
                {"mlp",
                 {{"epochs", t.mlp.epochs},
                  {"batch_size", t.mlp.batch_size},
                  {"optimizer", t.mlp.optimizer == Optimizer::adam ? "adam" : "sgd"},
                  {"learning_rate", t.mlp.learning_rate},
                  {"lr_decay", t.mlp.lr_decay},
                  {"decay_every", t.mlp.decay_every},
                  {"beta1", t.mlp.beta1},
                  {"beta2", t.mlp.beta2},
                  {"epsilon", t.mlp.epsilon}}},
                {"validation_fraction", t.validation_fraction},
                {"project_inputs", t.project_inputs},
                {"rank_tol", t.rank_tol},
                {"compare_models", t.compare_models},
                {"linear_ridge", t.linear_ridge},
                {"polynomial_ridge", t.polynomial_ridge},
                {"rbf_centers", t.rbf_centers},
                {"rbf_widths", t.rbf_widths},
                {"rbf_ridge", t.rbf_ridge},
                {"reference_mlps", t.reference_mlps}};
  const auto& g = c.design;
  j["design"] = {{"n_starts", g.n_starts},
                 {"max_iters", g.max_iters},
                 {"step_size", g.step_size},
                 {"max_halvings", g.max_halvings},
                 {"tolerance", g.tolerance},
                 {"window", g.window},
                 {"enforce_mean", g.enforce_mean},
                 {"init_style", std::string(to_string(g.init_style.value_or(d.style)))},
                 {"feedback_rounds", g.feedback_rounds},
                 {"feedback_k", g.feedback_k},
                 {"retrain", std::string(to_string(g.retrain))},
                 {"warm_epochs", g.warm_epochs},
                 {"warm_learning_rate", g.warm_learning_rate},
                 {"top_profiles", g.top_profiles}};
  return j;
}

}  // namespace

std::string config_to_json(const RunConfig& c) { return resolved(c).dump(2) + "\n"; }

std::string config_hash(const RunConfig& c) {
  ordered_json j = resolved(c);
  // Neither the destination nor the worker count changes any output.
  j.erase("output_dir");
  j.erase("threads");
  return fnv1a_hex(j.dump());
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fibril
