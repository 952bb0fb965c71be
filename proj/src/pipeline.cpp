#include "fibril/pipeline.hpp"

#include "fibril/design.hpp"
#include "fibril/error.hpp"
#include "fibril/io.hpp"
#include "fibril/mechanics.hpp"
#include "fibril/model.hpp"
#include "fibril/model_selection.hpp"
#include "fibril/regression.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace fibril {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::ordered_json;

// Held-out predictions within this absolute error count as inside the band.
constexpr double kBand = 0.03;

void RunLog::operator()(const std::string& line) const {
  if (out) *out << line << std::endl;
}

namespace {

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

ordered_json json_num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

std::string two_digits(int k) {
  std::ostringstream s;
  s << std::setw(2) << std::setfill('0') << k;
  return s.str();
}

fs::path stage_dir(const RunConfig& c, const char* stage) { return fs::path(c.output_dir) / stage; }

// A stage owns its directory: stale files from an earlier run would
// otherwise leak into the manifest.
fs::path fresh_dir(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (ec) throw DomainError("cannot clear " + dir.string() + ": " + ec.message());
  fs::create_directories(dir);
  return dir;
}

void require_file(const fs::path& path, const char* stage) {
  if (!fs::exists(path)) {
    throw DomainError("missing " + path.string() + ": run `fibril " + std::string(stage) + "` first");
  }
}

SamplerConfig sampler_of(const RunConfig& c) {
  SamplerConfig s = default_sampler(mean_compliance(c));
  if (c.dataset.bounds) {
    s.c_lo = (*c.dataset.bounds)[0];
    s.c_hi = (*c.dataset.bounds)[1];
  }
  s.style = c.dataset.style;
  s.radial_degree = c.dataset.radial_degree;
  s.max_amplitude = c.dataset.max_amplitude;
  return s;
}

std::vector<Index> hidden_of(int layers, int width) { return std::vector<Index>(static_cast<std::size_t>(layers), width); }

std::string arch_name(int layers, int width) { return "mlp" + std::to_string(layers) + "x" + std::to_string(width); }

std::pair<int, int> arch_of(const MlpModel& m) {
  const auto sizes = m.layer_sizes();
  const int layers = static_cast<int>(m.hidden_layers());
  return {layers, layers > 0 ? static_cast<int>(sizes[1]) : 0};
}

double band_fraction(const VectorXd& y, const VectorXd& p) {
  if (y.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return ((p - y).array().abs() <= kBand).cast<double>().mean();
}

}  // namespace

void write_manifest(const fs::path& dir, const RunConfig& config, const std::string& command) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ordered_json list = ordered_json::array();
  for (const auto& f : files) {
    const std::string bytes = read_text_file(f);
    list.push_back({{"path", fs::relative(f, dir).generic_string()}, {"bytes", bytes.size()}, {"fnv1a", fnv1a_hex(bytes)}});
  }
  ordered_json resolved = ordered_json::parse(config_to_json(config));
  resolved.erase("output_dir");
  resolved.erase("threads");
  ordered_json j;
  j["tool"] = "fibril";
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["config"] = resolved;
  j["files"] = list;
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

VectorXd read_design_csv(const fs::path& path, Index n_fibrils) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read design file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ":1", "empty design file");
  const auto header = split_csv_line(line);
  const auto col = std::find(header.begin(), header.end(), std::string_view("C"));
  if (col == header.end()) throw ParseError(path.string() + ":1", "no column named C");
  const auto k = static_cast<std::size_t>(col - header.begin());
  std::vector<double> values;
  for (long row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(row);
    if (fields.size() != header.size()) throw ParseError(where, "expected " + std::to_string(header.size()) + " fields");
    values.push_back(parse_double(fields[k], where + ":C"));
  }
  if (static_cast<Index>(values.size()) != n_fibrils) {
    throw DomainError(path.string() + " has " + std::to_string(values.size()) + " rows for " +
                      std::to_string(n_fibrils) + " fibrils");
  }
  return Eigen::Map<VectorXd>(values.data(), n_fibrils);
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(const RunConfig& config, const RunLog& log) {
  const FibrilArray layout = build_layout(config);
  const VectorXd c = config.simulate.design_csv.empty() ? fibril_compliances(layout)
                                                        : read_design_csv(config.simulate.design_csv, layout.size());
  const auto& s = config.simulate;
  log("simulate: " + std::string(to_string(layout.layout_kind)) + " layout, N = " + std::to_string(layout.size()));
  const DetachmentTrace trace = s.delta_D > 0.0 ? stepped_simulate(layout, c, s.beta_x, s.beta_y, s.delta_D)
                                                : simulate_detachment(layout, c, s.beta_x, s.beta_y);
  const fs::path dir = fresh_dir(stage_dir(config, kSimulateDir));
  {
    std::ofstream out(dir / "trace.csv");
    write_trace_csv(out, trace);
  }
  {
    std::ofstream out(dir / "polyline.csv");
    write_polyline_csv(out, trace);
  }
  {
    std::ofstream out(dir / "layout.csv");
    write_layout_csv(out, layout);
  }
  ordered_json j = ordered_json::parse(trace_summary_json(trace));
  j["layout"] = std::string(to_string(layout.layout_kind));
  j["n_events"] = trace.events.size();
  j["mean_compliance"] = c.mean();
  j["simulator"] = s.delta_D > 0.0 ? "stepped" : "event_driven";
  if (s.delta_D > 0.0) j["delta_D"] = s.delta_D;
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
  write_manifest(dir, config, "simulate");
  log("simulate: strength " + format_double(trace.strength));
}

// ---------------------------------------------------------------- dataset

void cmd_dataset(const RunConfig& config, const RunLog& log) {
  const FibrilArray layout = build_layout(config);
  GenerateConfig g;
  g.n_target = config.dataset.n_samples;
  g.sampler = sampler_of(config);
  g.filter_ceiling = config.dataset.filter_ceiling;
  g.master_seed = config.seed;
  g.min_acceptance = config.dataset.min_acceptance;
  g.probe_batch = config.dataset.probe_batch;
  g.threads = config.threads;
  log("dataset: labeling " + std::to_string(g.n_target) + " designs on N = " + std::to_string(layout.size()) +
      " fibrils");
  Dataset ds = generate(layout, g);
  ds.split = split(ds, config.dataset.test_fraction, derive_seed(config.seed, Stage::split));
  const fs::path dir = fresh_dir(stage_dir(config, kDatasetDir));
  save(ds, dir);
  write_manifest(dir, config, "dataset");
  log("dataset: " + std::to_string(ds.size()) + " samples from " + std::to_string(ds.candidates_drawn) +
      " candidates (acceptance " + format_double(ds.acceptance_rate) + ")");
}

// ---------------------------------------------------------------- train

namespace {

struct Arch {
  int layers = 0;
  int width = 0;
  std::size_t index = 0;
};

struct Row {
  std::string name;
  Index parameters = 0;
  Metrics train, test;
  double cv_mse = std::numeric_limits<double>::quiet_NaN();
  bool selected = false;
};

struct Splits {
  MatrixXd X, Xt;
  VectorXd y, yt;
  std::vector<Index> test_rows;
};

Splits load_splits(const Dataset& ds) {
  Splits s;
  const auto tr = ds.indices(SplitTag::train);
  s.test_rows = ds.indices(SplitTag::test);
  if (tr.empty()) throw DomainError("dataset has no training samples");
  s.X = ds.designs(tr);
  s.y = ds.labels(tr);
  s.Xt = ds.designs(s.test_rows);
  s.yt = ds.labels(s.test_rows);
  return s;
}

TrainConfig with_seed(TrainConfig t, std::uint64_t seed) {
  t.seed = seed;
  return t;
}

}  // namespace

void cmd_train(const RunConfig& config, const RunLog& log) {
  const fs::path data_dir = stage_dir(config, kDatasetDir);
  require_file(data_dir / "dataset.json", "dataset");
  const Dataset ds = load(data_dir);
  const Splits sp = load_splits(ds);
  const auto& t = config.train;
  const double m = ds.sampler.mean_c;
  const InputTransform T = t.project_inputs ? fit_transform(sp.X, m, t.rank_tol) : standardize(m, ds.width());
  log("train: " + std::to_string(sp.X.rows()) + " train / " + std::to_string(sp.Xt.rows()) + " test samples, " +
      std::to_string(T.feature_width()) + " input features");

  // Validation subset for checkpoint selection, carved from the training split.
  const auto n_val = static_cast<Index>(std::llround(static_cast<double>(sp.X.rows()) * t.validation_fraction));
  std::vector<Index> fit_rows, val_rows;
  {
    Rng rng(derive_seed(config.seed, Stage::validate));
    const auto perm = rng.permutation(static_cast<std::size_t>(sp.X.rows()));
    for (std::size_t k = 0; k < perm.size(); ++k) (static_cast<Index>(k) < n_val ? val_rows : fit_rows).push_back(static_cast<Index>(perm[k]));
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
  }
  const MatrixXd Xf = sp.X(fit_rows, Eigen::all), Xv = sp.X(val_rows, Eigen::all);
  const VectorXd yf = sp.y(fit_rows), yv = sp.y(val_rows);

  auto fit_mlp = [&](int layers, int width, std::uint64_t init_seed) {
    const auto hidden = hidden_of(layers, width);
    return train_mlp(init_mlp(T, hidden, init_seed), Xf, yf, Xv, yv, with_seed(t.mlp, splitmix64(init_seed)));
  };

  // Architecture grid.
  std::vector<Arch> grid;
  for (int l : t.grid_layers)
    for (int w : t.grid_widths) grid.push_back({l, w, grid.size()});
  log("train: " + std::to_string(t.cv_folds) + "-fold cross-validation over " + std::to_string(grid.size()) +
      " architectures");
  TrainConfig cv_cfg = t.mlp;
  cv_cfg.epochs = t.cv_epochs;
  const auto cv = kfold_cv_grid(
      sp.X, sp.y, grid, t.cv_folds, derive_seed(config.seed, Stage::folds),
      [&](const Arch& a, const MatrixXd& Xa, const VectorXd& ya, const MatrixXd& Xb, const VectorXd&) {
        const auto seed = derive_seed(config.seed, Stage::train, 1 + a.index);
        const auto r = train_mlp(init_mlp(T, hidden_of(a.layers, a.width), seed), Xa, ya, MatrixXd(), VectorXd(),
                                 with_seed(cv_cfg, splitmix64(seed)));
        return forward_batch(r.model, Xb);
      },
      [&](const Arch& a) { return init_mlp(T, hidden_of(a.layers, a.width), 0).parameter_count(); }, config.threads);
  const Arch best = cv.cells[cv.best];
  log("train: selected " + arch_name(best.layers, best.width) + " (cv mse " +
      format_double(cv.mean_mse[static_cast<Index>(cv.best)]) + ")");

  const TrainResult final_fit = fit_mlp(best.layers, best.width, derive_seed(config.seed, Stage::train, 0));
  const Surrogate selected = final_fit.model;

  const fs::path dir = fresh_dir(stage_dir(config, kTrainDir));
  {
    std::ostringstream s;
    s << "layers,width,parameters";
    for (int f = 0; f < t.cv_folds; ++f) s << ",fold_" << f << "_mse";
    s << ",mean_mse,selected\n";
    for (std::size_t c = 0; c < grid.size(); ++c) {
      s << grid[c].layers << ',' << grid[c].width << ',' << cv.parameter_count[c];
      for (int f = 0; f < t.cv_folds; ++f) s << ',' << num(cv.fold_mse(static_cast<Index>(c), f));
      s << ',' << num(cv.mean_mse[static_cast<Index>(c)]) << ',' << (c == cv.best ? "true" : "false") << '\n';
    }
    write_text_file(dir / "cv_table.csv", s.str());
  }
  {
    std::ofstream out(dir / "training_log.csv");
    write_training_log_csv(out, final_fit.log);
  }
  save_model(selected, dir / "model.json");

  std::vector<Row> rows;
  auto add_row = [&](const std::string& name, const Surrogate& model, double cv_mse, bool is_selected) {
    Row r;
    r.name = name;
    r.parameters = parameter_count(model);
    r.train = metrics(sp.y, predict_batch(model, sp.X));
    r.test = metrics(sp.yt, predict_batch(model, sp.Xt));
    r.cv_mse = cv_mse;
    r.selected = is_selected;
    rows.push_back(r);
    log("train: " + name + " test r2 " + num(r.test.r2));
  };

  if (t.compare_models) {
    fs::create_directories(dir / "models");
    const RegressionModel lin = fit_linear(T, sp.X, sp.y, t.linear_ridge);
    save_model(lin, dir / "models" / "linear.json");
    add_row("linear", lin, std::numeric_limits<double>::quiet_NaN(), false);
    const RegressionModel poly = fit_polynomial3(T, sp.X, sp.y, t.polynomial_ridge);
    save_model(poly, dir / "models" / "polynomial3.json");
    add_row("polynomial3", poly, std::numeric_limits<double>::quiet_NaN(), false);

    const auto rbf_seed = derive_seed(config.seed, Stage::rbf);
    auto rbf_options = [&](double w) {
      RbfOptions o;
      o.n_centers = t.rbf_centers;
      o.width = w;
      o.ridge = t.rbf_ridge;
      o.seed = rbf_seed;
      return o;
    };
    const auto rbf_cv = kfold_cv_grid(
        sp.X, sp.y, t.rbf_widths, t.cv_folds, derive_seed(config.seed, Stage::folds, 1),
        [&](double w, const MatrixXd& Xa, const VectorXd& ya, const MatrixXd& Xb, const VectorXd&) {
          return predict_batch(fit_rbf(T, Xa, ya, rbf_options(w)), Xb);
        },
        [&](double) { return static_cast<Index>(std::min<Index>(t.rbf_centers, sp.X.rows()) + 1); }, config.threads);
    {
      std::ostringstream s;
      s << "width,mean_mse,selected\n";
      for (std::size_t c = 0; c < t.rbf_widths.size(); ++c)
        s << num(t.rbf_widths[c]) << ',' << num(rbf_cv.mean_mse[static_cast<Index>(c)]) << ','
          << (c == rbf_cv.best ? "true" : "false") << '\n';
      write_text_file(dir / "rbf_cv.csv", s.str());
    }
    const RegressionModel rbf = fit_rbf(T, sp.X, sp.y, rbf_options(t.rbf_widths[rbf_cv.best]));
    for (const auto& w : rbf.warnings) log("train: rbf: " + w);
    save_model(rbf, dir / "models" / "rbf.json");
    add_row("rbf", rbf, rbf_cv.mean_mse[static_cast<Index>(rbf_cv.best)], false);

    bool selected_listed = false;
    for (std::size_t i = 0; i < t.reference_mlps.size(); ++i) {
      const auto [layers, width] = t.reference_mlps[i];
      const std::string name = arch_name(layers, width);
      const bool is_selected = layers == best.layers && width == best.width;
      double cv_mse = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t c = 0; c < grid.size(); ++c)
        if (grid[c].layers == layers && grid[c].width == width) cv_mse = cv.mean_mse[static_cast<Index>(c)];
      if (is_selected) {
        selected_listed = true;
        save_model(selected, dir / "models" / (name + ".json"));
        add_row(name, selected, cv_mse, true);
        continue;
      }
      const TrainResult r = fit_mlp(layers, width, derive_seed(config.seed, Stage::train, 100 + i));
      save_model(r.model, dir / "models" / (name + ".json"));
      add_row(name, r.model, cv_mse, false);
    }
    if (!selected_listed) add_row(arch_name(best.layers, best.width), selected, cv.mean_mse[static_cast<Index>(cv.best)], true);
  } else {
    add_row(arch_name(best.layers, best.width), selected, cv.mean_mse[static_cast<Index>(cv.best)], true);
  }

  {
    std::ostringstream s;
    s << "model,parameters,train_mse,test_mse,train_r2,test_r2,cv_mse,selected\n";
    for (const auto& r : rows)
      s << r.name << ',' << r.parameters << ',' << num(r.train.mse) << ',' << num(r.test.mse) << ',' << num(r.train.r2)
        << ',' << num(r.test.r2) << ',' << num(r.cv_mse) << ',' << (r.selected ? "true" : "false") << '\n';
    write_text_file(dir / "model_comparison.csv", s.str());
  }

  const VectorXd pt = predict_batch(selected, sp.Xt);
  const Metrics mt = metrics(sp.yt, pt);
  ordered_json j;
  j["selected"] = {{"model", arch_name(best.layers, best.width)},
                   {"layers", best.layers},
                   {"width", best.width},
                   {"parameters", parameter_count(selected)},
                   {"cv_mse", cv.mean_mse[static_cast<Index>(cv.best)]},
                   {"best_epoch", final_fit.best_epoch},
                   {"test_mse", mt.mse},
                   {"test_r2", json_num(mt.r2)},
                   {"band", kBand},
                   {"band_fraction", json_num(band_fraction(sp.yt, pt))}};
  ordered_json cmp = ordered_json::array();
  for (const auto& r : rows)
    cmp.push_back({{"model", r.name}, {"test_r2", json_num(r.test.r2)}, {"test_mse", r.test.mse}});
  j["comparison"] = cmp;
  j["n_train"] = fit_rows.size();
  j["n_validation"] = val_rows.size();
  j["n_test"] = sp.test_rows.size();
  j["feature_width"] = T.feature_width();
  write_text_file(dir / "metrics.json", j.dump(2) + "\n");
  write_manifest(dir, config, "train");
}

// ---------------------------------------------------------------- design

namespace {

struct Pooled {
  DesignResult result;
  int round = 0;
};

DesignProblem problem_of(const RunConfig& config, const Dataset& ds) {
  const auto& d = config.design;
  DesignProblem p;
  p.mean_c = ds.sampler.mean_c;
  p.c_lo = ds.sampler.c_lo;
  p.c_hi = ds.sampler.c_hi;
  p.n_starts = d.n_starts;
  p.max_iters = d.max_iters;
  p.step_size = d.step_size;
  p.max_halvings = d.max_halvings;
  p.tolerance = d.tolerance;
  p.window = d.window;
  p.enforce_mean = d.enforce_mean;
  p.init = ds.sampler;
  if (d.init_style) p.init.style = *d.init_style;
  p.threads = config.threads;
  return p;
}

}  // namespace

void cmd_design(const RunConfig& config, const RunLog& log) {
  const fs::path data_dir = stage_dir(config, kDatasetDir);
  const fs::path model_path = stage_dir(config, kTrainDir) / "model.json";
  require_file(data_dir / "dataset.json", "dataset");
  require_file(model_path, "train");
  const Dataset original = load(data_dir);
  Surrogate model = load_model(model_path);
  require_input_width(model, original.width());
  const auto& d = config.design;
  const FibrilArray& layout = original.layout;
  DesignProblem problem = problem_of(config, original);

  const double uniform = adhesive_strength(layout, VectorXd::Constant(layout.size(), problem.mean_c));
  const double label_max = original.labels().maxCoeff();
  log("design: uniform strength " + format_double(uniform) + ", best training label " + format_double(label_max));

  Dataset current = original;
  std::vector<Pooled> pooled;
  std::ostringstream rounds_csv;
  rounds_csv << "round,n_train,appended,test_r2,converged,best_predicted,best_verified,pooled_best\n";
  const auto test_rows = original.indices(SplitTag::test);
  const MatrixXd Xt = original.designs(test_rows);
  const VectorXd yt = original.labels(test_rows);
  int appended = 0;
  for (int round = 0; round <= d.feedback_rounds; ++round) {
    problem.seed = derive_seed(config.seed, Stage::design, static_cast<std::uint64_t>(round));
    const auto results = optimize(layout, model, problem);
    int converged = 0;
    for (const auto& r : results) {
      converged += r.converged ? 1 : 0;
      pooled.push_back({r, round});
    }
    double pooled_best = 0.0;
    for (const auto& p : pooled) pooled_best = std::max(pooled_best, p.result.verified_strength);
    rounds_csv << round << ',' << current.indices(SplitTag::train).size() << ',' << appended << ','
               << num(metrics(yt, predict_batch(model, Xt)).r2) << ',' << converged << ','
               << num(results.front().predicted_strength) << ',' << num(results.front().verified_strength) << ','
               << num(pooled_best) << '\n';
    log("design: round " + std::to_string(round) + " best verified " + format_double(results.front().verified_strength) +
        " (predicted " + format_double(results.front().predicted_strength) + "), pooled best " + format_double(pooled_best));
    if (round == d.feedback_rounds) break;

    auto fb = feedback(current, results, d.feedback_k);
    for (const auto& n : fb.notices) log("design: " + n);
    current = std::move(fb.dataset);
    appended = fb.appended;
    const auto* mlp = std::get_if<MlpModel>(&model);
    if (!mlp) throw DomainError("feedback retraining needs an MLP predictor");
    const auto rows = current.indices(SplitTag::train);
    const MatrixXd X = current.designs(rows);
    const VectorXd y = current.labels(rows);
    const auto init_seed = derive_seed(config.seed, Stage::train, 1000 * static_cast<std::uint64_t>(round + 1));
    TrainConfig tc = config.train.mlp;
    tc.seed = splitmix64(init_seed);
    if (d.retrain == RetrainMode::fresh) {
      const auto [layers, width] = arch_of(*mlp);
      const MlpModel init = init_mlp(mlp->transform, hidden_of(layers, width), init_seed, mlp->hidden_activation);
      model = train_mlp(init, X, y, MatrixXd(), VectorXd(), tc).model;
    } else {
      tc.epochs = d.warm_epochs;
      tc.learning_rate = d.warm_learning_rate;
      model = train_mlp(*mlp, X, y, MatrixXd(), VectorXd(), tc).model;
    }
  }

  std::stable_sort(pooled.begin(), pooled.end(), [](const Pooled& a, const Pooled& b) {
    if (a.result.verified_strength != b.result.verified_strength)
      return a.result.verified_strength > b.result.verified_strength;
    if (a.result.predicted_strength != b.result.predicted_strength)
      return a.result.predicted_strength > b.result.predicted_strength;
    if (a.round != b.round) return a.round < b.round;
    return a.result.start_id < b.result.start_id;
  });

  const fs::path dir = fresh_dir(stage_dir(config, kDesignDir));
  write_text_file(dir / "rounds.csv", rounds_csv.str());
  {
    std::ostringstream s;
    s << "rank,round,start_id,predicted,verified,discrepancy,over_tolerance,iterations,converged\n";
    for (std::size_t k = 0; k < pooled.size(); ++k) {
      const auto& r = pooled[k].result;
      s << k + 1 << ',' << pooled[k].round << ',' << r.start_id << ',' << num(r.predicted_strength) << ','
        << num(r.verified_strength) << ',' << num(r.discrepancy()) << ',' << (r.over_tolerance(kBand) ? "true" : "false")
        << ',' << r.iterations << ','
        << (r.converged ? "true" : "false") << '\n';
    }
    write_text_file(dir / "ranked.csv", s.str());
  }
  const auto n_top = std::min<std::size_t>(static_cast<std::size_t>(d.top_profiles), pooled.size());
  ordered_json top = ordered_json::array();
  for (std::size_t k = 0; k < n_top; ++k) {
    const auto& r = pooled[k].result;
    const ProfileReport prof = profile_report(r.c_opt, layout);
    std::ostringstream s;
    s << "fibril_id,x_hat,y_hat,r_over_R,C,C_normalized\n";
    for (const auto& row : prof.rows) {
      const auto& f = layout.fibrils[row.fibril_id];
      s << row.fibril_id << ',' << num(f.x_hat) << ',' << num(f.y_hat) << ',' << num(row.r_over_R) << ',' << num(row.C)
        << ',' << num(row.C_normalized) << '\n';
    }
    write_text_file(dir / "designs" / ("rank_" + two_digits(static_cast<int>(k + 1)) + ".csv"), s.str());
    top.push_back({{"rank", k + 1},
                   {"round", pooled[k].round},
                   {"start_id", r.start_id},
                   {"predicted", r.predicted_strength},
                   {"verified", r.verified_strength},
                   {"iterations", r.iterations},
                   {"converged", r.converged},
                   {"c", std::vector<double>(r.c_opt.data(), r.c_opt.data() + r.c_opt.size())}});
  }
  ordered_json j;
  j["layout"] = std::string(to_string(layout.layout_kind));
  j["n_fibrils"] = layout.size();
  j["mean_compliance"] = problem.mean_c;
  j["uniform_strength"] = uniform;
  j["label_ceiling"] = original.filter_ceiling;
  j["label_max"] = label_max;
  j["feedback_rounds"] = d.feedback_rounds;
  j["retrain"] = d.retrain == RetrainMode::fresh ? "fresh" : "warm";
  j["n_results"] = pooled.size();
  j["best_verified"] = pooled.front().result.verified_strength;
  j["best_predicted"] = pooled.front().result.predicted_strength;
  if (pooled.size() >= 5) j["top5_span"] = pooled[0].result.verified_strength - pooled[4].result.verified_strength;
  j["top"] = top;
  ordered_json all = ordered_json::array();
  for (std::size_t k = 0; k < pooled.size(); ++k)
    all.push_back({{"rank", k + 1},
                   {"round", pooled[k].round},
                   {"start_id", pooled[k].result.start_id},
                   {"predicted", pooled[k].result.predicted_strength},
                   {"verified", pooled[k].result.verified_strength}});
  j["ranked"] = all;
  write_text_file(dir / "results.json", j.dump(1) + "\n");
  save_model(model, dir / "model.json");
  save(current, dir / "dataset");
  write_manifest(dir / "dataset", config, "design");
  write_manifest(dir, config, "design");
  log("design: best verified strength " + format_double(pooled.front().result.verified_strength));
}

// ---------------------------------------------------------------- report

void cmd_report(const RunConfig& config, const fs::path& run_dir, const RunLog& log) {
  const fs::path data_dir = run_dir / kDatasetDir;
  const fs::path model_path = run_dir / kTrainDir / "model.json";
  const fs::path results_path = run_dir / kDesignDir / "results.json";
  require_file(data_dir / "dataset.json", "dataset");
  require_file(model_path, "train");
  require_file(results_path, "design");
  const Dataset ds = load(data_dir);
  const Surrogate model = load_model(model_path);
  require_input_width(model, ds.width());

  ordered_json results;
  try {
    results = ordered_json::parse(read_text_file(results_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(results_path.string(), e.what());
  }
  if (!results.contains("top") || !results["top"].is_array() || results["top"].empty()) {
    throw DomainError(results_path.string() + " holds no design results");
  }

  const fs::path dir = fresh_dir(run_dir / kReportDir);
  const auto test_rows = ds.indices(SplitTag::test);
  const MatrixXd Xt = ds.designs(test_rows);
  const VectorXd yt = ds.labels(test_rows);
  const VectorXd pt = predict_batch(model, Xt);
  {
    std::ostringstream s;
    s << "sample,actual,predicted,abs_error,within_band\n";
    for (std::size_t k = 0; k < test_rows.size(); ++k) {
      const auto i = static_cast<Index>(k);
      const double e = std::abs(pt[i] - yt[i]);
      s << test_rows[k] << ',' << num(yt[i]) << ',' << num(pt[i]) << ',' << num(e) << ',' << (e <= kBand ? "true" : "false")
        << '\n';
    }
    write_text_file(dir / "scatter.csv", s.str());
  }

  std::ostringstream ranked;
  ranked << "rank,predicted,verified\n";
  ordered_json top_profile;
  std::string statement;
  try {
    for (const auto& entry : results["top"]) {
      const int rank = entry.at("rank").get<int>();
      const auto c_vec = entry.at("c").get<std::vector<double>>();
      if (static_cast<Index>(c_vec.size()) != ds.width()) throw DomainError("design width does not match the layout");
      const VectorXd c = Eigen::Map<const VectorXd>(c_vec.data(), ds.width());
      const ProfileReport prof = profile_report(c, ds.layout);
      std::ostringstream s;
      s << "fibril_id,r_over_R,C,C_normalized\n";
      for (const auto& row : prof.rows)
        s << row.fibril_id << ',' << num(row.r_over_R) << ',' << num(row.C) << ',' << num(row.C_normalized) << '\n';
      write_text_file(dir / "profiles" / ("rank_" + two_digits(rank) + ".csv"), s.str());
      if (rank == 1) {
        const bool softer = prof.softer_periphery();
        top_profile = {{"verified", entry.at("verified").get<double>()},
                       {"n_inner", prof.n_inner},
                       {"n_outer", prof.n_outer},
                       {"inner_mean", prof.inner_mean},
                       {"outer_mean", prof.outer_mean},
                       {"inner_mean_normalized", json_num(prof.inner_mean_normalized)},
                       {"outer_mean_normalized", json_num(prof.outer_mean_normalized)},
                       {"spearman", json_num(prof.spearman)},
                       {"softer_periphery", softer}};
        std::ostringstream st;
        st << "top-ranked design " << (softer ? "has" : "does not have") << " a softer periphery: mean C over r/R > 0.8 is "
           << format_double(prof.outer_mean) << " versus " << format_double(prof.inner_mean)
           << " over r/R < 0.2, Spearman rho(r/R, C) = " << num(prof.spearman);
        statement = st.str();
      }
    }
    for (const auto& entry : results.at("ranked"))
      ranked << entry.at("rank").get<int>() << ',' << num(entry.at("predicted").get<double>()) << ','
             << num(entry.at("verified").get<double>()) << '\n';
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(results_path.string(), e.what());
  }
  write_text_file(dir / "ranked_strength.csv", ranked.str());

  const double frac = band_fraction(yt, pt);
  ordered_json j;
  j["layout"] = std::string(to_string(ds.layout.layout_kind));
  j["n_test"] = test_rows.size();
  j["band"] = kBand;
  j["band_fraction"] = json_num(frac);
  j["band_accepted"] = frac >= 0.95;
  j["uniform_strength"] = results.value("uniform_strength", 0.0);
  j["best_verified"] = results.value("best_verified", 0.0);
  j["top_profile"] = top_profile;
  j["statement"] = statement;
  write_text_file(dir / "report.json", j.dump(2) + "\n");
  write_manifest(dir, config, "report");
  log("report: " + format_double(frac * 100.0) + "% of test predictions within " + format_double(kBand));
  if (!statement.empty()) log("report: " + statement);
}

}  // namespace fibril
