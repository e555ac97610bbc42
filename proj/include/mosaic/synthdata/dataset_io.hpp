#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mosaic/synthdata/scene.hpp"

namespace mosaic::synth {

// Manifest (text):
//   #format mosaic-manifest 1
//   dataset <seed> <count>
//   sample <index> <scene_seed> <n_objects> then per object:
//     <kind> <cx> <cy> <size> <size2> <layer> <gray_bucket>
// Blob (samples.bin): per sample, image then edge, depth, sketch, keypoint
// maps, each 32*32 little-endian float32, row-major.
void write_manifest(std::ostream& os, std::uint64_t seed, const std::vector<ImageSample>& samples);
// Re-renders samples from the specs recorded in the manifest.
std::vector<ImageSample> read_manifest(std::istream& is, std::uint64_t* seed_out = nullptr);

void write_dataset(const std::filesystem::path& dir, std::uint64_t seed,
                   const std::vector<ImageSample>& samples);
std::vector<ImageSample> load_dataset(const std::filesystem::path& dir);

}  // namespace mosaic::synth
