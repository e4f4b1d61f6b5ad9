#pragma once

// Discretized base manifolds, rectangular index patches, charts and covers.
//
// Every field lives on a Patch: a rectangular box of lattice points of the base
// grid.  Along each axis a patch is periodic (it spans a full periodic axis),
// or open.  Open ends use second-order one-sided stencils, except ends that sit
// on a pole of the sphere, which use the first-order closure paired with a
// half-weight trapezoid row.  That pairing gives summation by parts with exact
// boundary terms, so discrete Stokes holds across the poles.

#include <array>
#include <map>
#include <optional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ck {

enum class Manifold { TORUS2, TORUS4, SPHERE2 };

const char* manifold_name(Manifold m);
Manifold parse_manifold(const std::string& s);

struct BaseGrid {
  Manifold manifold = Manifold::TORUS2;
  int n = 2;
  std::vector<int> dims;         // lattice points per axis
  std::vector<double> spacing;   // grid step per axis (angular steps on the sphere)
  std::vector<bool> periodic;

  // Unit-volume flat torus [0,1)^n with cells[a] points on axis a.
  static std::shared_ptr<const BaseGrid> torus(const std::vector<int>& cells);
  // Unit sphere in (theta, phi): ntheta intervals (ntheta+1 nodes including
  // both poles), nphi periodic nodes.  ntheta must be even.
  static std::shared_ptr<const BaseGrid> sphere(int ntheta, int nphi);

  bool is_sphere() const { return manifold == Manifold::SPHERE2; }
  std::size_t num_points() const;
  int wrap(int axis, int i) const;
  // Quadrature weight (cell volume) of the lattice point with wrapped indices g.
  double metric_weight(const int* g) const;
  // Diagonal inverse metric g^{aa} at g.  At a pole node sin(theta) is replaced
  // by sin(h/2), the value at the midpoint seen by the pole closure.
  double inv_metric(const int* g, int axis) const;
  double total_volume() const;
  std::vector<double> metric_weights() const;
};

// A box of lattice indices: lo may be negative or exceed dims on periodic axes.
struct Box {
  std::vector<int> lo;
  std::vector<int> len;
  bool operator==(const Box&) const = default;
};

struct Axis {
  int count = 0;
  double h = 1.0;
  bool periodic = false;
  bool pole_lo = false;
  bool pole_hi = false;
};

// Finite-difference stencil at one position of an axis; offsets are relative.
struct Stencil {
  int k = 0;
  std::array<int, 3> off{};
  std::array<double, 3> c{};
};

class Patch {
 public:
  Patch(std::shared_ptr<const BaseGrid> grid, Box box);

  const BaseGrid& grid() const { return *grid_; }
  const std::shared_ptr<const BaseGrid>& grid_ptr() const { return grid_; }
  const Box& box() const { return box_; }
  int dim() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int a) const { return axes_[a]; }
  std::size_t size() const { return size_; }
  std::size_t stride(int a) const { return stride_[a]; }

  void unflatten(std::size_t p, int* idx) const;
  std::size_t flatten(const int* idx) const;
  // Wrapped global lattice index of local index i along axis a.
  int global(int a, int i) const;
  // Local index along a for a global (any representative) index, or -1.
  int local_of_global(int a, int g) const;
  // Unwrapped coordinate along axis a (x, or theta/phi on the sphere).
  double coord(int a, int i) const;

  Stencil stencil(int a, int i) const;

  double weight(std::size_t p) const { return w_[p]; }
  double param_weight(std::size_t p) const { return pw_[p]; }
  double inv_metric(std::size_t p, int a) const { return ginv_[a][p]; }
  const std::vector<double>& weights() const { return w_; }

  bool same_as(const Patch& o) const { return grid_ == o.grid_ && box_ == o.box_; }

 private:
  std::shared_ptr<const BaseGrid> grid_;
  Box box_;
  std::vector<Axis> axes_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
  std::vector<double> w_, pw_;
  std::vector<std::vector<double>> ginv_;
};

using PatchPtr = std::shared_ptr<const Patch>;

// Whole base manifold as a single patch.
PatchPtr global_patch(const std::shared_ptr<const BaseGrid>& grid);

struct Chart {
  int id = 0;
  Box box;       // full chart including margins
  Box core;      // cores of a cover partition the lattice
  int margin = 0;
  PatchPtr patch;
  // per axis and side: true when that side carries a margin (not a full
  // periodic span and not a pole)
  std::vector<std::array<bool, 2>> margin_side;
};

// One connected box of an intersection of charts; idx[t][q] is the local index
// in the t-th chart of the tuple of the q-th point of the piece.
struct OverlapPiece {
  Box box;
  PatchPtr patch;
  std::vector<std::vector<std::size_t>> idx;
};

using Overlap = std::vector<OverlapPiece>;

class PartitionOfUnity;

struct Refinement {
  std::shared_ptr<const class Cover> parent;
  std::vector<int> map;  // child chart -> parent chart
};

class Cover {
 public:
  Cover(std::shared_ptr<const BaseGrid> grid, std::vector<Chart> charts, std::string label);

  const BaseGrid& grid() const { return *grid_; }
  const std::shared_ptr<const BaseGrid>& grid_ptr() const { return grid_; }
  const std::vector<Chart>& charts() const { return charts_; }
  const Chart& chart(int i) const { return charts_[i]; }
  int size() const { return static_cast<int>(charts_.size()); }
  const std::string& label() const { return label_; }

  // Pairwise overlaps for i < j, nonempty only.
  const std::map<std::pair<int, int>, Overlap>& pairs() const { return pairs_; }
  const Overlap* overlap(int i, int j) const;  // requires i < j
  // Triple overlaps i < j < k, nonempty only.
  const std::map<std::array<int, 3>, Overlap>& triples() const { return triples_; }

  const std::optional<Refinement>& refinement_of() const { return refinement_; }
  void set_refinement(Refinement r) { refinement_ = std::move(r); }

  const PartitionOfUnity& pou() const;

 private:
  std::shared_ptr<const BaseGrid> grid_;
  std::vector<Chart> charts_;
  std::string label_;
  std::map<std::pair<int, int>, Overlap> pairs_;
  std::map<std::array<int, 3>, Overlap> triples_;
  std::optional<Refinement> refinement_;
  mutable std::shared_ptr<const PartitionOfUnity> pou_;
};

using CoverPtr = std::shared_ptr<const Cover>;

enum class BumpProfile { Smooth, Cosine };

class PartitionOfUnity {
 public:
  std::vector<std::vector<double>> weights;  // one per chart, on the chart patch
  double c_part = 0.0;
  BumpProfile profile = BumpProfile::Smooth;
};

// Chart builders.  Cores split each axis into nearly equal parts; charts add
// `margin` cells on every margin side.
CoverPtr torus_cover(const std::shared_ptr<const BaseGrid>& grid, const std::vector<int>& charts_per_axis,
                     int margin);
// Sphere cover with k_bands theta-intervals: two polar caps plus, for k_bands >= 4,
// k_bands - 2 bands each split into 2 * k_bands sectors.  k_bands = 2 is the
// two-cap cover.
CoverPtr sphere_cover(const std::shared_ptr<const BaseGrid>& grid, int k_bands, int margin);
CoverPtr single_chart_cover(const std::shared_ptr<const BaseGrid>& grid);

// Default margin for a base grid: an eighth of the smallest axis, at least 4.
int default_margin(const BaseGrid& grid);

PartitionOfUnity build_partition_of_unity(const Cover& cover, BumpProfile profile = BumpProfile::Smooth);

// Shrinks every margin side by `cells`; the result records the identity
// refinement map.  Throws MarginExhausted when fewer than 2 margin cells remain.
CoverPtr shrink_cover(const CoverPtr& cover, int cells);

// Checks V_j inside U_phi(j) with at least `clearance` cells on margin sides and
// returns the refinement map; throws MarginExhausted if some chart has no parent.
std::vector<int> refinement_map(const Cover& child, const Cover& parent, int clearance = 2);

// Intersection of boxes on the base grid, as a list of boxes.
std::vector<Box> intersect_boxes(const BaseGrid& grid, const Box& a, const Box& b);
std::size_t box_points(const Box& b);

// Mapping from the points of `sub` to local indices of `super` (-1 if absent).
std::vector<long> patch_index_map(const Patch& sub, const Patch& super);

}  // namespace ck
