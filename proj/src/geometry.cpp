#include "fibril/geometry.hpp"

#include "fibril/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace fibril {
namespace {

// Relative slack for boundary membership so that lattice points lying
// exactly on a region edge survive floating-point rounding.
constexpr double kBoundaryTol = 1e-9;

std::array<Eigen::Vector2d, 3> triangle_vertices(double circumradius) {
  std::array<Eigen::Vector2d, 3> v;
  for (int k = 0; k < 3; ++k) {
    const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / 3.0;
    v[k] = {circumradius * std::cos(angle), circumradius * std::sin(angle)};
  }
  return v;
}

FibrilArray build_lattice(LayoutKind kind, double shape_param, double spacing,
                          const FibrilSpec& fibril_template) {
  if (!(shape_param > 0.0) || !std::isfinite(shape_param)) {
    throw DomainError("layout size must be positive and finite");
  }
  if (!(spacing >= 2.0) || !std::isfinite(spacing)) {
    throw DomainError("spacing d/a must be >= 2 so neighbouring fibrils do not overlap");
  }
  validate(fibril_template);
  if (std::abs(fibril_template.radius_ratio - 1.0) > 1e-12) {
    throw DomainError("lattice layouts require a template with radius_ratio = 1 (a is the mean radius)");
  }

  FibrilArray array;
  array.layout_kind = kind;
  array.shape_param = shape_param;
  array.spacing = spacing;

  // Circumradius bounds every region, so this range covers all candidates.
  const double reach = kind == LayoutKind::square ? shape_param * std::numbers::sqrt2 : shape_param;
  const auto m = static_cast<long>(std::floor(reach / spacing)) + 1;
  for (long j = -m; j <= m; ++j) {
    for (long i = -m; i <= m; ++i) {
      const double x = static_cast<double>(i) * spacing;
      const double y = static_cast<double>(j) * spacing;
      if (inside_region(kind, shape_param, x, y)) {
        FibrilSpec f = fibril_template;
        f.x_hat = x;
        f.y_hat = y;
        array.fibrils.push_back(f);
      }
    }
  }
  if (array.fibrils.empty()) {
    throw DomainError("layout contains no lattice point");
  }
  return array;
}

}  // namespace

std::string_view to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::circle: return "circle";
    case LayoutKind::square: return "square";
    case LayoutKind::triangle: return "triangle";
    case LayoutKind::custom: return "custom";
  }
  return "custom";
}

LayoutKind layout_kind_from_string(std::string_view name) {
  if (name == "circle") return LayoutKind::circle;
  if (name == "square") return LayoutKind::square;
  if (name == "triangle") return LayoutKind::triangle;
  if (name == "custom") return LayoutKind::custom;
  throw ConfigError("unknown layout kind '" + std::string(name) + "'");
}

Eigen::MatrixX2d FibrilArray::positions() const {
  Eigen::MatrixX2d p(size(), 2);
  for (Eigen::Index i = 0; i < size(); ++i) {
    p(i, 0) = fibrils[i].x_hat;
    p(i, 1) = fibrils[i].y_hat;
  }
  return p;
}

double FibrilArray::characteristic_radius() const {
  if (layout_kind != LayoutKind::custom && shape_param > 0.0) return shape_param;
  double r = 0.0;
  for (const auto& f : fibrils) r = std::max(r, std::hypot(f.x_hat, f.y_hat));
  return r > 0.0 ? r : 1.0;
}

void validate(const FibrilSpec& spec) {
  if (!(spec.radius_ratio > 0.0) || !(spec.length_ratio > 0.0) || !(spec.modulus_ratio > 0.0)) {
    throw DomainError("fibril ratios must be strictly positive");
  }
  if (!std::isfinite(spec.x_hat) || !std::isfinite(spec.y_hat) || !std::isfinite(spec.radius_ratio) ||
      !std::isfinite(spec.length_ratio) || !std::isfinite(spec.modulus_ratio)) {
    throw DomainError("fibril fields must be finite");
  }
}

void validate(const ElasticContext& ctx) {
  if (!(ctx.poisson_ratio > -1.0 && ctx.poisson_ratio <= 0.5)) {
    throw DomainError("Poisson ratio must lie in (-1, 0.5]");
  }
  if (!(ctx.modulus_ratio_raw > 0.0) || !std::isfinite(ctx.modulus_ratio_raw)) {
    throw DomainError("E_f/E must be positive");
  }
}

void validate(const FibrilArray& array) {
  if (array.fibrils.empty()) throw DomainError("fibril array is empty");
  double radius_sum = 0.0;
  for (const auto& f : array.fibrils) {
    validate(f);
    radius_sum += f.radius_ratio;
  }
  const double mean_radius = radius_sum / static_cast<double>(array.fibrils.size());
  if (std::abs(mean_radius - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "mean radius_ratio must be 1 (got " << mean_radius << ")";
    throw DomainError(msg.str());
  }
  const auto n = array.fibrils.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = array.fibrils[i];
      const auto& b = array.fibrils[j];
      const double r = std::hypot(a.x_hat - b.x_hat, a.y_hat - b.y_hat);
      if (r < (a.radius_ratio + b.radius_ratio) * (1.0 - 1e-12)) {
        std::ostringstream msg;
        msg << "fibrils " << i << " and " << j << " overlap (distance " << r << ")";
        throw DomainError(msg.str());
      }
    }
  }
}

double plane_strain_ratio(const ElasticContext& ctx) {
  validate(ctx);
  return ctx.modulus_ratio_raw * (1.0 - ctx.poisson_ratio * ctx.poisson_ratio);
}

double fibril_compliance(const FibrilSpec& spec) {
  return spec.length_ratio / (spec.modulus_ratio * spec.radius_ratio * spec.radius_ratio);
}

Eigen::VectorXd fibril_compliances(const FibrilArray& array) {
  Eigen::VectorXd c(array.size());
  for (Eigen::Index i = 0; i < array.size(); ++i) c[i] = fibril_compliance(array.fibrils[i]);
  return c;
}

FibrilSpec default_template(const ElasticContext& ctx, double length_ratio) {
  FibrilSpec f;
  f.radius_ratio = 1.0;
  f.length_ratio = length_ratio;
  f.modulus_ratio = plane_strain_ratio(ctx);
  return f;
}

bool inside_region(LayoutKind kind, double shape_param, double x, double y) {
  const double s = shape_param;
  switch (kind) {
    case LayoutKind::circle:
      return x * x + y * y <= s * s * (1.0 + kBoundaryTol);
    case LayoutKind::square: {
      const double lim = s * (1.0 + kBoundaryTol);
      return std::abs(x) <= lim && std::abs(y) <= lim;
    }
    case LayoutKind::triangle: {
      const auto v = triangle_vertices(s);
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d& p = v[k];
        const Eigen::Vector2d& q = v[(k + 1) % 3];
        // Counter-clockwise vertices: interior is to the left of every edge.
        const double cross = (q.x() - p.x()) * (y - p.y()) - (q.y() - p.y()) * (x - p.x());
        if (cross < -kBoundaryTol * s * s) return false;
      }
      return true;
    }
    case LayoutKind::custom:
      return true;
  }
  return false;
}

FibrilArray build_circle(double radius_hat, double spacing, const FibrilSpec& fibril_template) {
  return build_lattice(LayoutKind::circle, radius_hat, spacing, fibril_template);
}

FibrilArray build_square(double half_side_hat, double spacing, const FibrilSpec& fibril_template) {
  return build_lattice(LayoutKind::square, half_side_hat, spacing, fibril_template);
}

FibrilArray build_triangle(double circumradius_hat, double spacing, const FibrilSpec& fibril_template) {
  return build_lattice(LayoutKind::triangle, circumradius_hat, spacing, fibril_template);
}

FibrilArray build_layout(LayoutKind kind, double shape_param, double spacing,
                         const FibrilSpec& fibril_template) {
  if (kind == LayoutKind::custom) {
    throw ConfigError("custom layouts are read from a layout CSV, not built");
  }
  return build_lattice(kind, shape_param, spacing, fibril_template);
}

void write_layout_csv(std::ostream& out, const FibrilArray& array) {
  out << "fibril_id,x_hat,y_hat,radius_ratio,length_ratio,modulus_ratio\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < array.fibrils.size(); ++i) {
    const auto& f = array.fibrils[i];
    out << i << ',' << f.x_hat << ',' << f.y_hat << ',' << f.radius_ratio << ',' << f.length_ratio << ','
        << f.modulus_ratio << '\n';
  }
}

FibrilArray read_layout_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source_name + ":1", "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "fibril_id,x_hat,y_hat,radius_ratio,length_ratio,modulus_ratio") {
    throw ParseError(source_name + ":1", "unexpected header '" + line + "'");
  }
  FibrilArray array;
  array.layout_kind = LayoutKind::custom;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 6> v{};
    std::istringstream row(line);
    std::string cell;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::getline(row, cell, ',')) {
        throw ParseError(source_name + ":" + std::to_string(line_no), "expected 6 fields, got " + std::to_string(k));
      }
      try {
        std::size_t used = 0;
        v[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(source_name + ":" + std::to_string(line_no) + ":field " + std::to_string(k + 1),
                         "not a number: '" + cell + "'");
      }
    }
    if (std::getline(row, cell, ',')) {
      throw ParseError(source_name + ":" + std::to_string(line_no), "too many fields");
    }
    if (static_cast<std::size_t>(v[0]) != array.fibrils.size()) {
      throw ParseError(source_name + ":" + std::to_string(line_no), "fibril_id out of order");
    }
    array.fibrils.push_back({v[1], v[2], v[3], v[4], v[5]});
  }
  validate(array);
  return array;
}

}  // namespace fibril
