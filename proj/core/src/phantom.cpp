#include "bsca/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bsca/preprocess.hpp"
#include "bsca/rng.hpp"

namespace bsca {

Tensor phantom_template(int label, int size) {
  if (label < 0 || label >= kNumClasses) {
    throw DataError("phantom class " + std::to_string(label) + " out of range");
  }
  if (size < 8) throw DataError("phantom size must be >= 8");

  Tensor img({size, size});
  const double center = (size - 1) / 2.0;
  const int bar = std::max(2, size / 8);
  const int cell = std::max(2, size / 16);
  for (int h = 0; h < size; ++h) {
    for (int w = 0; w < size; ++w) {
      const double r = std::hypot(h - center, w - center) / size;
      float v = 0.0f;
      switch (label) {
        case 0:  // two concentric rings
          v = ((r >= 0.18 && r < 0.24) || (r >= 0.34 && r < 0.40)) ? 0.9f : 0.1f;
          break;
        case 1:  // vertical bars
          v = ((w / bar) % 2 == 0) ? 0.85f : 0.15f;
          break;
        case 2:  // checkerboard
          v = ((h / cell + w / cell) % 2 == 0) ? 0.8f : 0.2f;
          break;
        case 3:  // filled disk
          v = (r < 0.3) ? 0.95f : 0.05f;
          break;
      }
      img.at(h, w) = v;
    }
  }
  return img;
}

PhantomSet gen_phantom(const PhantomConfig& cfg) {
  if (cfg.n_per_class < 1) throw DataError("phantom n_per_class must be >= 1");
  if (cfg.noise_level < 0.0) throw DataError("phantom noise_level must be >= 0");

  std::array<Tensor, kNumClasses> templates;
  for (int c = 0; c < kNumClasses; ++c) templates[static_cast<std::size_t>(c)] = phantom_template(c, cfg.size);

  PhantomSet set;
  for (int v = 0; v < cfg.n_per_class; ++v) {
    Volume vol;
    vol.dims = {cfg.size, cfg.size, kNumClasses};
    vol.spacing = {1.0f, 1.0f, 5.0f};
    vol.data.resize(static_cast<std::size_t>(vol.voxel_count()));
    for (int z = 0; z < kNumClasses; ++z) {
      const Tensor& tpl = templates[static_cast<std::size_t>(z)];
      Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(v) + 1,
                            static_cast<std::uint64_t>(z) + 1);
      for (int y = 0; y < cfg.size; ++y) {
        for (int x = 0; x < cfg.size; ++x) {
          double value = tpl.at(y, x);
          if (cfg.noise_level > 0.0) value += cfg.noise_level * rng.normal();
          value = std::clamp(value, 0.0, 1.0);
          vol.data[static_cast<std::size_t>(x) +
                   static_cast<std::size_t>(cfg.size) *
                       (static_cast<std::size_t>(y) + static_cast<std::size_t>(cfg.size) * z)] =
              static_cast<float>(value);
        }
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "phantom-%03d.nii", v);
    set.names.emplace_back(name);
    set.volumes.push_back(std::move(vol));
    for (int z = 0; z < kNumClasses; ++z) {
      set.manifest.rows.push_back(ManifestRow{set.names.back(), z, z});
    }
  }
  return set;
}

void write_phantom(const PhantomSet& set, const std::string& out_dir) {
  for (std::size_t i = 0; i < set.volumes.size(); ++i) {
    save_nifti(set.volumes[i], out_dir + "/" + set.names[i], NiftiDtype::f32);
  }
  save_manifest(set.manifest, out_dir + "/manifest.csv");
}

Dataset make_phantom_dataset(const PhantomSet& set, int image_size) {
  Dataset ds;
  ds.image_size = image_size;
  for (std::size_t v = 0; v < set.volumes.size(); ++v) {
    for (int z = 0; z < kNumClasses; ++z) {
      SliceSample s;
      s.source_id = set.names[v];
      s.slice_index = z;
      s.label = z;
      s.image = preprocess_slice(set.volumes[v], z, image_size);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace bsca
