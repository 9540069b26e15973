#include "mvsseg/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace mvsseg {

namespace {

struct FileCloser {
	void operator()(std::FILE* f) const {
		if (f) std::fclose(f);
	}
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
	throw std::runtime_error("png: " + path + ": " + what);
}

}  // namespace

ImageU16 readPng(const std::string& path) {
	FilePtr file(std::fopen(path.c_str(), "rb"));
	if (!file) fail(path, "cannot open");

	png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
	if (!png) fail(path, "png_create_read_struct failed");
	png_infop info = png_create_info_struct(png);
	if (!info) {
		png_destroy_read_struct(&png, nullptr, nullptr);
		fail(path, "png_create_info_struct failed");
	}
	if (setjmp(png_jmpbuf(png))) {
		png_destroy_read_struct(&png, &info, nullptr);
		fail(path, "decode error");
	}

	png_init_io(png, file.get());
	png_read_info(png, info);

	png_uint_32 width = 0, height = 0;
	int bitDepth = 0, colorType = 0;
	png_get_IHDR(png, info, &width, &height, &bitDepth, &colorType, nullptr, nullptr, nullptr);

	if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
	if (colorType == PNG_COLOR_TYPE_GRAY && bitDepth < 8) png_set_expand_gray_1_2_4_to_8(png);
	if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
	if (bitDepth == 16) png_set_swap(png);  // PNG stores 16-bit big-endian
	png_read_update_info(png, info);

	png_get_IHDR(png, info, &width, &height, &bitDepth, &colorType, nullptr, nullptr, nullptr);
	int channels = png_get_channels(png, info);

	ImageU16 out;
	out.width = static_cast<int>(width);
	out.height = static_cast<int>(height);
	out.channels = channels;
	out.bitDepth = bitDepth;
	out.samples.resize(static_cast<std::size_t>(width) * height * channels);

	std::vector<png_bytep> rows(height);
	std::vector<std::uint8_t> raw;
	if (bitDepth == 16) {
		for (png_uint_32 y = 0; y < height; ++y)
			rows[y] = reinterpret_cast<png_bytep>(out.samples.data() +
			                                      static_cast<std::size_t>(y) * width * channels);
	} else {
		raw.resize(static_cast<std::size_t>(width) * height * channels);
		for (png_uint_32 y = 0; y < height; ++y)
			rows[y] = raw.data() + static_cast<std::size_t>(y) * width * channels;
	}
	png_read_image(png, rows.data());
	png_read_end(png, nullptr);
	png_destroy_read_struct(&png, &info, nullptr);

	if (bitDepth != 16) {
		for (std::size_t i = 0; i < raw.size(); ++i) out.samples[i] = raw[i];
	}
	return out;
}

namespace {

void writePng16(const std::string& path, int width, int height, int colorType, int channels,
                std::span<const std::uint16_t> pixels) {
	if (width <= 0 || height <= 0) fail(path, "empty image");
	if (pixels.size() != static_cast<std::size_t>(width) * height * channels)
		fail(path, "pixel buffer size mismatch");

	FilePtr file(std::fopen(path.c_str(), "wb"));
	if (!file) fail(path, "cannot open for writing");

	png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
	if (!png) fail(path, "png_create_write_struct failed");
	png_infop info = png_create_info_struct(png);
	if (!info) {
		png_destroy_write_struct(&png, nullptr);
		fail(path, "png_create_info_struct failed");
	}
	if (setjmp(png_jmpbuf(png))) {
		png_destroy_write_struct(&png, &info);
		fail(path, "encode error");
	}

	png_init_io(png, file.get());
	png_set_IHDR(png, info, width, height, 16, colorType, PNG_INTERLACE_NONE,
	             PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
	png_write_info(png, info);
	png_set_swap(png);

	std::vector<png_bytep> rows(height);
	for (int y = 0; y < height; ++y)
		rows[y] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(
		    pixels.data() + static_cast<std::size_t>(y) * width * channels));
	png_write_image(png, rows.data());
	png_write_end(png, nullptr);
	png_destroy_write_struct(&png, &info);
}

}  // namespace

void writePngGray16(const std::string& path, int width, int height,
                    std::span<const std::uint16_t> pixels) {
	writePng16(path, width, height, PNG_COLOR_TYPE_GRAY, 1, pixels);
}

void writePngRgba16(const std::string& path, int width, int height,
                    std::span<const std::uint16_t> pixels) {
	writePng16(path, width, height, PNG_COLOR_TYPE_RGBA, 4, pixels);
}

}  // namespace mvsseg
