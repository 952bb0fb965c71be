#include "fibril/dataset.hpp"

#include "fibril/error.hpp"
#include "fibril/io.hpp"
#include "fibril/mechanics.hpp"
#include "fibril/parallel.hpp"
#include "fibril/projection.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fibril {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::ordered_json;

std::string_view to_string(SamplingStyle style) {
  switch (style) {
    case SamplingStyle::iid_uniform: return "iid_uniform";
    case SamplingStyle::radial_smooth: return "radial_smooth";
    case SamplingStyle::mixed: return "mixed";
  }
  return "?";
}

SamplingStyle sampling_style_from_string(std::string_view name) {
  if (name == "iid_uniform") return SamplingStyle::iid_uniform;
  if (name == "radial_smooth") return SamplingStyle::radial_smooth;
  if (name == "mixed") return SamplingStyle::mixed;
  throw ConfigError("unknown sampling style '" + std::string(name) + "' (iid_uniform, radial_smooth, mixed)");
}

SamplerConfig default_sampler(double mean_c) {
  SamplerConfig s;
  s.mean_c = mean_c;
  s.c_lo = mean_c / 10.0;
  s.c_hi = 10.0 * mean_c;
  return s;
}

namespace {

void check_sampler(const SamplerConfig& s) {
  if (!(s.c_lo > 0.0) || !(s.c_lo <= s.mean_c) || !(s.mean_c <= s.c_hi)) {
    std::ostringstream msg;
    msg << "infeasible sampler: need 0 < c_lo <= mean_c <= c_hi, got [" << s.c_lo << ", " << s.c_hi << "] with mean "
        << s.mean_c;
    throw DomainError(msg.str());
  }
  if (s.radial_degree < 1) throw DomainError("radial_degree must be at least 1");
  if (!(s.max_amplitude >= 0.0)) throw DomainError("max_amplitude must be non-negative");
}

VectorXd iid_raw(Index n, const SamplerConfig& s, Rng& rng) {
  VectorXd c(n);
  for (Index i = 0; i < n; ++i) c[i] = rng.uniform(s.c_lo, s.c_hi);
  return c;
}

// mean_c (1 + A p(r/R)) with p a random polynomial of zero mean over the
// fibrils, scaled so min p = -1. The amplitude A ~ U(0, max_amplitude) is
// capped so the profile never touches the bounds; the design then stays in
// the span of {r^k} and the smallest entry is exactly mean_c (1 - A).
VectorXd radial_raw(const FibrilArray& layout, const SamplerConfig& s, Rng& rng) {
  const Index n = layout.size();
  const double R = layout.characteristic_radius();
  VectorXd coeff(s.radial_degree + 1);
  for (Index k = 0; k < coeff.size(); ++k) coeff[k] = rng.normal();
  double amplitude = rng.uniform(0.0, s.max_amplitude);
  VectorXd p(n);
  for (Index i = 0; i < n; ++i) {
    const auto& f = layout.fibrils[i];
    const double x = R > 0.0 ? std::hypot(f.x_hat, f.y_hat) / R : 0.0;
    double v = 0.0;
    for (Index k = coeff.size() - 1; k >= 0; --k) v = v * x + coeff[k];
    p[i] = v;
  }
  p.array() -= p.mean();
  const double floor = -p.minCoeff();
  if (!(floor > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff()))) return VectorXd::Constant(n, s.mean_c);
  p /= floor;
  amplitude = std::min({amplitude, 1.0 - s.c_lo / s.mean_c, (s.c_hi / s.mean_c - 1.0) / p.maxCoeff()});
  return s.mean_c * (VectorXd::Ones(n) + amplitude * p);
}

}  // namespace

VectorXd sample_design(const FibrilArray& layout, const SamplerConfig& config, Rng& rng) {
  check_sampler(config);
  const Index n = layout.size();
  if (n == 0) throw DomainError("cannot sample a design for an empty layout");
  SamplingStyle style = config.style;
  if (style == SamplingStyle::mixed) {
    style = rng.uniform() < 0.5 ? SamplingStyle::iid_uniform : SamplingStyle::radial_smooth;
  }
  const VectorXd raw = style == SamplingStyle::iid_uniform ? iid_raw(n, config, rng) : radial_raw(layout, config, rng);
  return project(raw, config.mean_c, config.c_lo, config.c_hi);
}

MatrixXd Dataset::designs() const {
  MatrixXd X(size(), width());
  for (Index i = 0; i < size(); ++i) X.row(i) = samples[static_cast<std::size_t>(i)].c.transpose();
  return X;
}

VectorXd Dataset::labels() const {
  VectorXd y(size());
  for (Index i = 0; i < size(); ++i) y[i] = samples[static_cast<std::size_t>(i)].strength;
  return y;
}

std::vector<Index> Dataset::indices(SplitTag tag) const {
  if (split.size() != samples.size()) throw DomainError("dataset has no train/test assignment");
  std::vector<Index> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == tag) out.push_back(static_cast<Index>(i));
  return out;
}

MatrixXd Dataset::designs(std::span<const Index> rows) const {
  MatrixXd X(static_cast<Index>(rows.size()), width());
  for (std::size_t k = 0; k < rows.size(); ++k)
    X.row(static_cast<Index>(k)) = samples[static_cast<std::size_t>(rows[k])].c.transpose();
  return X;
}

VectorXd Dataset::labels(std::span<const Index> rows) const {
  VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) y[static_cast<Index>(k)] = samples[static_cast<std::size_t>(rows[k])].strength;
  return y;
}

Dataset generate(const FibrilArray& layout, const GenerateConfig& config) {
  validate(layout);
  check_sampler(config.sampler);
  if (config.n_target < 1) throw DomainError("n_target must be at least 1");
  if (!(config.min_acceptance > 0.0 && config.min_acceptance <= 1.0)) throw DomainError("min_acceptance must be in (0, 1]");

  Dataset ds;
  ds.layout = layout;
  ds.sampler = config.sampler;
  ds.filter_ceiling = config.filter_ceiling;
  ds.master_seed = config.master_seed;
  ds.samples.reserve(static_cast<std::size_t>(config.n_target));

  const long probe = std::max(1L, config.probe_batch);
  const long batch = std::max(probe, 64L * std::max(1, config.threads));
  const long cap = probe + static_cast<long>(std::ceil(static_cast<double>(config.n_target) / config.min_acceptance));

  std::vector<Sample> pending;
  long considered = 0;
  long accepted = 0;
  bool probed = false;
  while (accepted < config.n_target) {
    const long count = considered == 0 ? probe : batch;
    pending.assign(static_cast<std::size_t>(count), Sample{});
    parallel_for(static_cast<std::size_t>(count), config.threads, [&](std::size_t k) {
      const auto index = static_cast<std::uint64_t>(considered) + k;
      Rng rng(derive_seed(config.master_seed, Stage::dataset, index));
      Sample& s = pending[k];
      s.c = sample_design(layout, config.sampler, rng);
      s.strength = adhesive_strength(layout, s.c);
    });
    for (auto& s : pending) {
      ++considered;
      if (s.strength < config.filter_ceiling) {
        ds.samples.push_back(std::move(s));
        if (++accepted == config.n_target) break;
      }
    }
    const double rate = static_cast<double>(accepted) / static_cast<double>(considered);
    if ((!probed && accepted < config.n_target && rate < config.min_acceptance) ||
        (accepted < config.n_target && considered >= cap)) {
      std::ostringstream msg;
      msg << "acceptance rate " << rate << " after " << considered << " candidates is below the floor "
          << config.min_acceptance << "; widen the bounds, change the sampling style or raise the filter ceiling";
      throw DomainError(msg.str());
    }
    probed = true;
  }
  ds.candidates_drawn = considered;
  ds.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(considered);
  return ds;
}

std::vector<SplitTag> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DomainError("test_fraction must lie in (0, 1)");
  const std::size_t n = dataset.samples.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<SplitTag> tags(n, SplitTag::train);
  for (std::size_t k = 0; k < n_test; ++k) tags[perm[k]] = SplitTag::test;
  return tags;
}

namespace {

ordered_json layout_to_json(const FibrilArray& a) {
  ordered_json j;
  j["kind"] = std::string(to_string(a.layout_kind));
  j["shape_param"] = a.shape_param;
  j["spacing"] = a.spacing;
  ordered_json rows = ordered_json::array();
  for (const auto& f : a.fibrils)
    rows.push_back({f.x_hat, f.y_hat, f.radius_ratio, f.length_ratio, f.modulus_ratio});
  j["fibrils"] = std::move(rows);
  return j;
}

FibrilArray layout_from_json(const ordered_json& j) {
  FibrilArray a;
  a.layout_kind = layout_kind_from_string(j.at("kind").get<std::string>());
  a.shape_param = j.at("shape_param").get<double>();
  a.spacing = j.at("spacing").get<double>();
  for (const auto& row : j.at("fibrils")) {
    if (row.size() != 5) throw DomainError("fibril rows need 5 entries");
    a.fibrils.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(), row[3].get<double>(),
                         row[4].get<double>()});
  }
  return a;
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& dir) {
  ordered_json meta;
  meta["format_version"] = kDatasetFormatVersion;
  meta["n_samples"] = ds.samples.size();
  meta["n_fibrils"] = ds.width();
  meta["mean_compliance"] = ds.sampler.mean_c;
  meta["bounds"] = {ds.sampler.c_lo, ds.sampler.c_hi};
  meta["style"] = std::string(to_string(ds.sampler.style));
  meta["radial_degree"] = ds.sampler.radial_degree;
  meta["max_amplitude"] = ds.sampler.max_amplitude;
  meta["filter_ceiling"] = ds.filter_ceiling;
  meta["master_seed"] = ds.master_seed;
  meta["candidates_drawn"] = ds.candidates_drawn;
  meta["acceptance_rate"] = ds.acceptance_rate;
  std::vector<int> feedback, tags;
  for (const auto& s : ds.samples) feedback.push_back(s.feedback ? 1 : 0);
  for (auto t : ds.split) tags.push_back(static_cast<int>(t));
  meta["feedback"] = feedback;
  meta["split"] = tags;
  meta["layout"] = layout_to_json(ds.layout);

  std::string csv;
  for (Index i = 0; i < ds.width(); ++i) csv += "c_" + std::to_string(i) + ',';
  csv += "strength\n";
  for (const auto& s : ds.samples) {
    for (Index i = 0; i < s.c.size(); ++i) {
      csv += format_double(s.c[i]);
      csv += ',';
    }
    csv += format_double(s.strength);
    csv += '\n';
  }
  write_text_file(dir / "dataset.json", meta.dump(1) + "\n");
  write_text_file(dir / "samples.csv", csv);
}

Dataset load(const std::filesystem::path& dir, const LoadOptions& options) {
  const auto meta_path = dir / "dataset.json";
  const auto csv_path = dir / "samples.csv";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(csv_path)) {
    throw DomainError("no dataset in " + dir.string() + " (expected dataset.json and samples.csv)");
  }
  ordered_json meta;
  try {
    meta = ordered_json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(meta_path.string(), e.what());
  }

  Dataset ds;
  std::vector<int> feedback, tags;
  std::size_t n_samples = 0;
  try {
    const int version = meta.at("format_version").get<int>();
    if (version != kDatasetFormatVersion) {
      throw DomainError("unsupported dataset format version " + std::to_string(version) + " (this build reads " +
                        std::to_string(kDatasetFormatVersion) + ")");
    }
    n_samples = meta.at("n_samples").get<std::size_t>();
    ds.sampler.mean_c = meta.at("mean_compliance").get<double>();
    ds.sampler.c_lo = meta.at("bounds").at(0).get<double>();
    ds.sampler.c_hi = meta.at("bounds").at(1).get<double>();
    ds.sampler.style = sampling_style_from_string(meta.at("style").get<std::string>());
    ds.sampler.radial_degree = meta.at("radial_degree").get<int>();
    ds.sampler.max_amplitude = meta.at("max_amplitude").get<double>();
    ds.filter_ceiling = meta.at("filter_ceiling").get<double>();
    ds.master_seed = meta.at("master_seed").get<std::uint64_t>();
    ds.candidates_drawn = meta.at("candidates_drawn").get<long>();
    ds.acceptance_rate = meta.at("acceptance_rate").get<double>();
    feedback = meta.at("feedback").get<std::vector<int>>();
    tags = meta.at("split").get<std::vector<int>>();
    ds.layout = layout_from_json(meta.at("layout"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path.string(), e.what());
  } catch (const ConfigError& e) {
    throw ParseError(meta_path.string(), e.what());
  }
  validate(ds.layout);
  const Index n = ds.layout.size();
  if (meta.value("n_fibrils", Index{-1}) != n) throw ParseError(meta_path.string(), "n_fibrils does not match the layout");
  if (feedback.size() != n_samples) throw ParseError(meta_path.string(), "feedback flags do not match n_samples");
  if (!tags.empty() && tags.size() != n_samples) throw ParseError(meta_path.string(), "split tags do not match n_samples");

  std::istringstream in(read_text_file(csv_path));
  const std::string name = csv_path.filename().string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ":1", "missing header");
  const auto header = split_csv_line(line);
  if (static_cast<Index>(header.size()) != n + 1 || header.back() != "strength") {
    throw ParseError(name + ":1", "header must be c_0,...,c_" + std::to_string(n - 1) + ",strength");
  }
  for (Index i = 0; i < n; ++i) {
    if (header[static_cast<std::size_t>(i)] != "c_" + std::to_string(i)) {
      throw ParseError(name + ":1:field " + std::to_string(i + 1), "unexpected column name");
    }
  }
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != n + 1) {
      throw ParseError(where, "expected " + std::to_string(n + 1) + " fields, found " + std::to_string(fields.size()));
    }
    Sample s;
    s.c.resize(n);
    for (Index i = 0; i < n; ++i) s.c[i] = parse_double(fields[static_cast<std::size_t>(i)], where + ":field " + std::to_string(i + 1));
    s.strength = parse_double(fields.back(), where + ":field " + std::to_string(n + 1));
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.size() != n_samples) {
    throw ParseError(name + ":" + std::to_string(line_no), "expected " + std::to_string(n_samples) + " samples, found " +
                                                               std::to_string(ds.samples.size()) + " (truncated file?)");
  }
  for (std::size_t i = 0; i < n_samples; ++i) {
    ds.samples[i].feedback = feedback[i] != 0;
    if (std::abs(ds.samples[i].c.mean() - ds.sampler.mean_c) > 1e-9 * std::max(1.0, ds.sampler.mean_c)) {
      throw DomainError("sample " + std::to_string(i) + " violates the fixed-mean invariant");
    }
  }
  for (int t : tags) ds.split.push_back(t == 0 ? SplitTag::train : SplitTag::test);

  if (options.verify_fraction > 0.0 && n_samples > 0) {
    const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / options.verify_fraction)));
    for (std::size_t i = 0; i < n_samples; i += stride) {
      const double s = adhesive_strength(ds.layout, ds.samples[i].c);
      if (std::abs(s - ds.samples[i].strength) > options.verify_tol) {
        std::ostringstream msg;
        msg << "stored label of sample " << i << " (" << ds.samples[i].strength << ") does not match the simulator ("
            << s << ")";
        throw DomainError(msg.str());
      }
    }
  }
  return ds;
}

}  // namespace fibril
