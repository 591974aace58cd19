#include "paoxi/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "paoxi/error.hpp"
#include "paoxi/rng.hpp"

namespace paoxi {

void PhantomSpec::validate() const {
  if (!(extent_cm > 0.0)) throw ConfigError("extent must be positive");
  if (grid_dim < 8) throw ConfigError("grid must have at least 8 voxels per axis");
  if (grid_dim > 1024) throw ConfigError("grid larger than 1024 voxels per axis");
  const auto [dlo, dhi] = diameter_range_cm;
  if (!(dlo > 0.0 && dhi >= dlo && dhi < extent_cm / 2.0)) {
    throw ConfigError("diameter range must satisfy 0 < min <= max < extent/2");
  }
  const auto [slo, shi] = so2_range;
  if (!(slo >= 0.0 && shi >= slo && shi <= 1.0)) throw ConfigError("so2 range must lie in [0, 1]");
  if (n_vessels && (*n_vessels < 1 || *n_vessels > 255)) {
    throw ConfigError("vessel count must be between 1 and 255");
  }
  if (epidermis_voxels < 0 || dermis_voxels < 0 || breast_top_index() >= grid_dim - 1) {
    throw ConfigError("skin layers leave no breast region");
  }
}

VoxelGrid::VoxelGrid(Dims dims, double pitch_cm, int breast_top_index)
    : pitch_(pitch_cm),
      breast_top_(breast_top_index),
      labels_(dims, TissueType::kBreast),
      so2_(dims, 0.0f),
      vessel_id_(dims, 0) {}

TissueType VoxelGrid::background_at_depth(int z) const {
  if (z >= breast_top_) return TissueType::kBreast;
  // Everything above the breast is skin; the first layer(s) are epidermis.
  return z < epidermis_layers_ ? TissueType::kEpidermis : TissueType::kDermis;
}

std::size_t VoxelGrid::blood_voxel_count() const {
  return static_cast<std::size_t>(
      std::count(labels_.storage().begin(), labels_.storage().end(), TissueType::kBlood));
}

VoxelGrid make_layered_grid(const PhantomSpec& spec) {
  spec.validate();
  const Dims dims = Dims::cube(spec.grid_dim);
  VoxelGrid grid(dims, spec.voxel_pitch(), spec.breast_top_index());
  grid.set_epidermis_layers(spec.epidermis_voxels);
  auto& labels = grid.labels();
  for (int z = 0; z < spec.breast_top_index(); ++z) {
    const TissueType t = grid.background_at_depth(z);
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) labels(x, y, z) = t;
  }
  return grid;
}

std::size_t voxelize_cylinder(VoxelGrid& grid, const Cylinder& cyl) {
  const Dims d = grid.dims();
  const double r = cyl.radius_cm;
  const auto id = static_cast<std::uint8_t>(cyl.vessel_id);
  const float so2 = static_cast<float>(cyl.so2);
  std::size_t marked = 0;
#pragma omp parallel for reduction(+ : marked) schedule(static)
  for (int z = grid.breast_top_index(); z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        if (cyl.distance_to_axis(grid.voxel_center(x, y, z)) <= r) {
          grid.labels()(x, y, z) = TissueType::kBlood;
          grid.so2()(x, y, z) = so2;
          grid.vessel_id()(x, y, z) = id;
          ++marked;
        }
      }
    }
  }
  return marked;
}

std::size_t slice_hits(const VoxelGrid& grid, const Cylinder& cyl) {
  const Dims d = grid.dims();
  const int y = center_slice_index(d);
  std::size_t hits = 0;
  for (int z = grid.breast_top_index(); z < d.nz; ++z)
    for (int x = 0; x < d.nx; ++x)
      if (cyl.distance_to_axis(grid.voxel_center(x, y, z)) <= cyl.radius_cm) ++hits;
  return hits;
}

namespace {

// Shallowest depth reached by the axis line while inside the box [0, L]^3.
// Returns +inf when the line misses the box.
double min_depth_inside(const Vec3& p, const Vec3& u, double extent) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  const double pc[3] = {p.x, p.y, p.z};
  const double uc[3] = {u.x, u.y, u.z};
  for (int a = 0; a < 3; ++a) {
    if (uc[a] == 0.0) {
      if (pc[a] < 0.0 || pc[a] > extent) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (0.0 - pc[a]) / uc[a];
    double tb = (extent - pc[a]) / uc[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::numeric_limits<double>::infinity();
  return std::min(p.z + t0 * u.z, p.z + t1 * u.z);
}

Vec3 random_direction(CounterStream& rng) {
  const double cz = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
  return normalized(Vec3{sz * std::cos(phi), sz * std::sin(phi), cz});
}

}  // namespace

VoxelGrid generate_phantom(const PhantomSpec& spec) {
  VoxelGrid grid = make_layered_grid(spec);
  CounterStream rng(spec.rng_seed, StreamDomain::kPhantom, 0);

  const int n = spec.n_vessels ? *spec.n_vessels : 1 + static_cast<int>(rng.uniform_index(3));
  const double extent = spec.extent_cm;
  const double pitch = spec.voxel_pitch();
  const double breast_top_cm = spec.breast_top_index() * pitch;
  const double slice_y = (center_slice_index(grid.dims()) + 0.5) * pitch;
  const auto [dlo, dhi] = spec.diameter_range_cm;
  const auto [slo, shi] = spec.so2_range;

  for (int k = 0; k < n; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      Cylinder c;
      c.vessel_id = k + 1;
      c.radius_cm = 0.5 * (dlo + (dhi - dlo) * rng.uniform());
      c.so2 = slo + (shi - slo) * rng.uniform();
      c.direction = random_direction(rng);
      // Axis point on the image plane, somewhere in the breast region.
      c.point_on_axis = {extent * rng.uniform(), slice_y,
                         breast_top_cm + (extent - breast_top_cm) * rng.uniform()};
      if (min_depth_inside(c.point_on_axis, c.direction, extent) < breast_top_cm + c.radius_cm) {
        continue;
      }
      if (slice_hits(grid, c) == 0) continue;
      voxelize_cylinder(grid, c);
      grid.vessels().push_back(c);
      placed = true;
    }
    if (!placed) {
      throw GenerationError("could not place vessel " + std::to_string(k + 1) + " below the dermis after " +
                            std::to_string(kPlacementRetries) + " attempts (seed " +
                            std::to_string(spec.rng_seed) + ")");
    }
  }
  return grid;
}

GroundTruthSlices ground_truth_slices(const VoxelGrid& grid, int slice_y) {
  const Dims d = grid.dims();
  if (slice_y < 0 || slice_y >= d.ny) throw ConfigError("slice index outside the volume");
  GroundTruthSlices out{Mask(d.nz, d.nx, 0), Image<float>(d.nz, d.nx, 0.0f)};
  for (int z = 0; z < d.nz; ++z) {
    for (int x = 0; x < d.nx; ++x) {
      if (grid.vessel_id()(x, slice_y, z) > 0) {
        out.seg_mask(z, x) = 1;
        out.so2_map(z, x) = grid.so2()(x, slice_y, z);
      }
    }
  }
  return out;
}

}  // namespace paoxi
