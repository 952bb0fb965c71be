#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fibril {

/// One fibril, all quantities in units of the mean fibril radius a.
struct FibrilSpec {
  double x_hat = 0.0;
  double y_hat = 0.0;
  double radius_ratio = 1.0;   // a_i / a
  double length_ratio = 5.0;   // h_i / a
  double modulus_ratio = 0.75; // E_i / E*
};

enum class LayoutKind { circle, square, triangle, custom };

std::string_view to_string(LayoutKind kind);
LayoutKind layout_kind_from_string(std::string_view name);

/// Ordered fibril collection. The index order is canonical: designs,
/// dataset columns and traces all refer to fibrils by position here.
struct FibrilArray {
  std::vector<FibrilSpec> fibrils;
  LayoutKind layout_kind = LayoutKind::custom;
  double shape_param = 0.0;  // R/a, half-side/a or circumradius/a
  double spacing = 0.0;      // d/a

  Eigen::Index size() const { return static_cast<Eigen::Index>(fibrils.size()); }

  /// N x 2 matrix of dimensionless centers.
  Eigen::MatrixX2d positions() const;

  /// Characteristic radius used for r/R profiles. Falls back to the largest
  /// center distance for custom layouts.
  double characteristic_radius() const;
};

/// Backing-layer and fibril material pair.
struct ElasticContext {
  double poisson_ratio = 0.5;
  double modulus_ratio_raw = 1.0;  // E_f / E
};

/// Throws DomainError when an invariant of the array is broken
/// (empty, non-positive ratios, mean radius != 1, overlapping fibrils).
void validate(const FibrilArray& array);
void validate(const FibrilSpec& spec);
void validate(const ElasticContext& ctx);

/// E_i/E* = (E_f/E)(1 - nu^2).
double plane_strain_ratio(const ElasticContext& ctx);

/// Dimensionless extension compliance C_i = (E*/E_i)(a/a_i)^2 (h_i/a).
double fibril_compliance(const FibrilSpec& spec);

/// Per-fibril extension compliances of an array in canonical order.
Eigen::VectorXd fibril_compliances(const FibrilArray& array);

/// Template built from the default physical parameters (h = 5a, E_f = E, nu = 0.5).
FibrilSpec default_template(const ElasticContext& ctx = {}, double length_ratio = 5.0);

// Layout builders. Square lattice aligned with the axes, one node at the
// origin; points on the boundary are kept.
FibrilArray build_circle(double radius_hat, double spacing, const FibrilSpec& fibril_template);
FibrilArray build_square(double half_side_hat, double spacing, const FibrilSpec& fibril_template);
/// Equilateral triangle, apex along +y, centroid at the origin.
FibrilArray build_triangle(double circumradius_hat, double spacing, const FibrilSpec& fibril_template);
FibrilArray build_layout(LayoutKind kind, double shape_param, double spacing,
                         const FibrilSpec& fibril_template);

/// Region membership used by the builders (with the same boundary tolerance).
bool inside_region(LayoutKind kind, double shape_param, double x, double y);

// CSV: fibril_id,x_hat,y_hat,radius_ratio,length_ratio,modulus_ratio
void write_layout_csv(std::ostream& out, const FibrilArray& array);
FibrilArray read_layout_csv(std::istream& in, const std::string& source_name = "layout");

}  // namespace fibril
