#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mvsseg {

/// Decoded PNG. Samples are stored as uint16 regardless of source depth;
/// 8-bit files keep their 0..255 range and report bitDepth = 8.
struct ImageU16 {
	int width = 0;
	int height = 0;
	int channels = 0;
	int bitDepth = 0;
	std::vector<std::uint16_t> samples;  // row-major, interleaved

	std::uint16_t sample(int x, int y, int c = 0) const {
		return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
	}
};

ImageU16 readPng(const std::string& path);

/// 16-bit single-channel grayscale, the on-disk mask label format.
void writePngGray16(const std::string& path, int width, int height,
                    std::span<const std::uint16_t> pixels);

/// 16-bit RGBA, used for the RGB+height export.
void writePngRgba16(const std::string& path, int width, int height,
                    std::span<const std::uint16_t> pixels);

}  // namespace mvsseg
