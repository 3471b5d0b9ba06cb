#include "m2p/synth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "m2p/error.hpp"
#include "m2p/kernels.hpp"
#include "m2p/rng.hpp"

namespace m2p::synth {

namespace {

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (i + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string sample_name(std::size_t i, std::size_t count) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(count > 0 ? count - 1 : 0).size());
  return "s" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

Volume3D gen_volume(const Dims& dims, double vf_target, const CorrLen& corr_len, std::uint64_t seed) {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw Error("gen_volume: degenerate dims");
  if (!(vf_target > 0.0 && vf_target < 1.0)) throw Error("gen_volume: vf_target must lie in (0, 1)");
  for (double c : corr_len) {
    if (!(c >= 0.0)) throw Error("gen_volume: corr_len must be >= 0");
  }
  const std::size_t n = dims[0] * dims[1] * dims[2];
  Rng rng(seed);
  std::vector<double> field(n);
  for (auto& f : field) f = rng.normal();
  kernels::parallel::gaussian_smooth_periodic(field, dims[0], dims[1], dims[2], corr_len);

  // Ties broken by index so the threshold is exact and deterministic.
  const auto ones = static_cast<std::size_t>(std::llround(vf_target * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto above = [&](std::size_t a, std::size_t b) {
    return field[a] > field[b] || (field[a] == field[b] && a < b);
  };
  if (ones < n) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(ones), order.end(), above);

  Volume3D v{dims[0], dims[1], dims[2], std::vector<std::uint8_t>(n, 0)};
  for (std::size_t i = 0; i < ones; ++i) v.voxels[order[i]] = 1;
  return v;
}

Volume3D gen_volume(const Dims& dims, double vf_target, double corr_len, std::uint64_t seed) {
  return gen_volume(dims, vf_target, CorrLen{corr_len, corr_len, corr_len}, seed);
}

double interface_density_x(const Volume3D& v) {
  check_volume(v);
  std::size_t changes = 0;
  for (std::size_t z = 0; z < v.nz; ++z) {
    for (std::size_t y = 0; y < v.ny; ++y) {
      for (std::size_t x = 0; x < v.nx; ++x) {
        changes += v.at(x, y, z) != v.at((x + 1) % v.nx, y, z);
      }
    }
  }
  return static_cast<double>(changes) / static_cast<double>(v.voxels.size());
}

double planted_property(const Volume3D& v) {
  const double vf = v.volume_fraction();
  const double mixed = 2.0 * vf * (1.0 - vf);
  const double s = mixed > 0.0 ? std::clamp(interface_density_x(v) / mixed, 0.0, 1.0) : 0.0;
  const double c = 1.0 - s;
  const double t = vf * (c + (1.0 - c) * vf);
  return kPropertyLower + (kPropertyUpper - kPropertyLower) * t;
}

std::vector<Sample> gen_ensemble(const EnsembleSpec& spec) {
  if (spec.count == 0) throw Error("gen_ensemble: count must be positive");
  if (!(spec.vf_lo > 0.0 && spec.vf_hi < 1.0 && spec.vf_lo <= spec.vf_hi)) {
    throw Error("gen_ensemble: vf range must satisfy 0 < lo <= hi < 1");
  }
  if (!(spec.corr_lo >= 0.0 && spec.corr_lo <= spec.corr_hi)) throw Error("gen_ensemble: bad corr_len range");

  std::vector<Sample> out(spec.count);
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(spec.count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t si = 0; si < count; ++si) {
    try {
      const auto i = static_cast<std::size_t>(si);
      Sample& s = out[i];
      Rng rng(sample_seed(spec.seed, i));
      s.id = sample_name(i, spec.count);
      s.vf_target = spec.vf_lo + (spec.vf_hi - spec.vf_lo) * (static_cast<double>(i) + 0.5) /
                                     static_cast<double>(spec.count);
      for (auto& c : s.corr_len) c = rng.uniform(spec.corr_lo, spec.corr_hi);
      s.volume = gen_volume(spec.dims, s.vf_target, s.corr_len, rng.next());
      s.property = planted_property(s.volume);
    } catch (...) {
#pragma omp critical(m2p_synth_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::filesystem::path write_ensemble(const std::vector<Sample>& samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<SampleManifest> manifest;
  for (const auto& s : samples) {
    const auto payload = dir / (s.id + ".bin");
    save_volume(s.volume, payload);
    manifest.push_back({s.id, {payload.filename()}, s.property, Unit::Dimensionless, std::nullopt});
  }
  const auto path = dir / "manifest.csv";
  write_manifest(manifest, path);
  return path;
}

}  // namespace m2p::synth
