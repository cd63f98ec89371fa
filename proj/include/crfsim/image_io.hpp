#pragma once

#include <filesystem>

#include "crfsim/energy.hpp"

namespace crfsim {

/// 8-bit grayscale, object = 255.
void writeMaskPng(const std::filesystem::path& path, const Labeling& mask);
/// Any grayscale PNG; pixels at or above half intensity are object.
Labeling readMaskPng(const std::filesystem::path& path);

/// 16-bit grayscale, value round(p * 65535).
void writeProbabilityPng(const std::filesystem::path& path, const GridD& prob);
/// 8- or 16-bit grayscale scaled to [0, 1].
GridD readProbabilityPng(const std::filesystem::path& path);

/// 8-bit RGB from channels in [0, 1].
void writeImagePng(const std::filesystem::path& path, const ColorImage& image);
/// Gray, RGB, palette or alpha PNG at 8 or 16 bits, as RGB in [0, 1].
ColorImage readImagePng(const std::filesystem::path& path);

}  // namespace crfsim
