#pragma once

// Layered breast phantom with cylindrical vessels.
//
// Coordinates are in cm with the origin at a corner of the volume. x runs
// along the long axis of the beam aperture, y along the short axis, and z is
// depth below the skin surface.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "paoxi/grid.hpp"
#include "paoxi/optics.hpp"

namespace paoxi {

struct PhantomSpec {
  int grid_dim = 128;                        ///< voxels per axis
  double extent_cm = 3.8;                    ///< edge length of the cube
  std::optional<int> n_vessels;              ///< fixed count; otherwise uniform on {1,2,3}
  std::array<double, 2> diameter_range_cm{0.05, 0.4};
  std::array<double, 2> so2_range{0.0, 1.0};
  int epidermis_voxels = 1;
  int dermis_voxels = 4;
  std::uint64_t rng_seed = 0;

  double voxel_pitch() const { return extent_cm / grid_dim; }
  /// Depth index of the first breast voxel.
  int breast_top_index() const { return epidermis_voxels + dermis_voxels; }
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct Cylinder {
  Vec3 point_on_axis;  ///< cm
  Vec3 direction;      ///< unit vector
  double radius_cm = 0.0;
  double so2 = 0.0;
  int vessel_id = 0;

  double distance_to_axis(const Vec3& p) const { return norm(cross(p - point_on_axis, direction)); }
};

class VoxelGrid {
 public:
  VoxelGrid(Dims dims, double pitch_cm, int breast_top_index);

  const Dims& dims() const { return labels_.dims(); }
  double pitch() const { return pitch_; }
  int breast_top_index() const { return breast_top_; }

  Vec3 voxel_center(int x, int y, int z) const {
    return {(x + 0.5) * pitch_, (y + 0.5) * pitch_, (z + 0.5) * pitch_};
  }

  /// Layer assignment by depth, ignoring vessels.
  TissueType background_at_depth(int z) const;
  int epidermis_layers() const { return epidermis_layers_; }
  void set_epidermis_layers(int n) { epidermis_layers_ = n; }

  Volume<TissueType>& labels() { return labels_; }
  const Volume<TissueType>& labels() const { return labels_; }
  Volume<float>& so2() { return so2_; }
  const Volume<float>& so2() const { return so2_; }
  Volume<std::uint8_t>& vessel_id() { return vessel_id_; }
  const Volume<std::uint8_t>& vessel_id() const { return vessel_id_; }

  const std::vector<Cylinder>& vessels() const { return vessels_; }
  std::vector<Cylinder>& vessels() { return vessels_; }

  std::size_t blood_voxel_count() const;

 private:
  double pitch_;
  int breast_top_;
  int epidermis_layers_ = 1;
  Volume<TissueType> labels_;
  Volume<float> so2_;
  Volume<std::uint8_t> vessel_id_;
  std::vector<Cylinder> vessels_;
};

/// Empty layered volume: epidermis, dermis, then breast down to the bottom.
VoxelGrid make_layered_grid(const PhantomSpec& spec);

/// Marks breast-region voxels whose centre lies within the cylinder radius of
/// its axis line. Later calls overwrite earlier vessels. Returns the number of
/// voxels marked.
std::size_t voxelize_cylinder(VoxelGrid& grid, const Cylinder& cyl);

/// Index along y of the image plane (the centre of the short beam axis).
inline int center_slice_index(const Dims& d) { return d.ny / 2; }

/// Number of breast voxels the cylinder would mark in the centre slice.
std::size_t slice_hits(const VoxelGrid& grid, const Cylinder& cyl);

/// Pure function of spec (including rng_seed).
VoxelGrid generate_phantom(const PhantomSpec& spec);

inline constexpr int kPlacementRetries = 100;

struct GroundTruthSlices {
  Mask seg_mask;        ///< rows = depth, cols = x
  Image<float> so2_map;
};

GroundTruthSlices ground_truth_slices(const VoxelGrid& grid, int slice_y);
inline GroundTruthSlices ground_truth_slices(const VoxelGrid& grid) {
  return ground_truth_slices(grid, center_slice_index(grid.dims()));
}

}  // namespace paoxi
