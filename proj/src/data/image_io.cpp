// SPDX-License-Identifier: Apache-2.0
#include "data/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

namespace arbiscale {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    require(f != nullptr, Status::kIo, "cannot open file: " + path);
    return f;
}

Tensor<float> rgb8_to_tensor(const std::vector<std::uint8_t>& rgb, int h, int w) {
    Tensor<float> img({h, w, 3});
    for (std::int64_t i = 0; i < img.numel(); ++i)
        img[i] = static_cast<float>(rgb[static_cast<std::size_t>(i)]) / 127.5f - 1.0f;
    return img;
}

Tensor<float> load_png_file(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, Status::kInternal, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(Status::kInternal, "libpng info init failed");
    }
    std::vector<std::uint8_t> rgb;
    int h = 0, w = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(Status::kIo, "failed to decode PNG: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    require(stride == static_cast<std::size_t>(w) * 3, Status::kIo,
            "unexpected PNG row layout: " + path);
    rgb.resize(static_cast<std::size_t>(h) * w * 3);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = rgb.data() + static_cast<std::size_t>(r) * stride;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return rgb8_to_tensor(rgb, h, w);
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

Tensor<float> load_jpeg_file(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(Status::kIo, "failed to decode JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return rgb8_to_tensor(rgb, h, w);
}

std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

Tensor<float> load_bmp_file(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    std::uint8_t header[54];
    require(std::fread(header, 1, 54, f.get()) == 54, Status::kIo, "truncated BMP: " + path);
    require(header[0] == 'B' && header[1] == 'M', Status::kIo, "not a BMP file: " + path);
    const std::uint32_t data_offset = read_u32le(header + 10);
    const std::int32_t w = static_cast<std::int32_t>(read_u32le(header + 18));
    const std::int32_t h_raw = static_cast<std::int32_t>(read_u32le(header + 22));
    const std::uint16_t bpp = static_cast<std::uint16_t>(header[28] | (header[29] << 8));
    const std::uint32_t compression = read_u32le(header + 30);
    require(compression == 0 && (bpp == 24 || bpp == 32), Status::kIo,
            "unsupported BMP variant (need uncompressed 24/32-bit): " + path);
    const bool bottom_up = h_raw > 0;
    const int h = bottom_up ? h_raw : -h_raw;
    require(w > 0 && h > 0, Status::kIo, "invalid BMP dimensions: " + path);
    require(std::fseek(f.get(), static_cast<long>(data_offset), SEEK_SET) == 0, Status::kIo,
            "truncated BMP: " + path);
    const int bytes = bpp / 8;
    const std::size_t row_stride = (static_cast<std::size_t>(w) * bytes + 3) & ~std::size_t{3};
    std::vector<std::uint8_t> row(row_stride);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
    for (int r = 0; r < h; ++r) {
        require(std::fread(row.data(), 1, row_stride, f.get()) == row_stride, Status::kIo,
                "truncated BMP: " + path);
        const int dst_r = bottom_up ? h - 1 - r : r;
        for (int c = 0; c < w; ++c) {
            // BMP stores BGR(A).
            rgb[(static_cast<std::size_t>(dst_r) * w + c) * 3 + 0] = row[c * bytes + 2];
            rgb[(static_cast<std::size_t>(dst_r) * w + c) * 3 + 1] = row[c * bytes + 1];
            rgb[(static_cast<std::size_t>(dst_r) * w + c) * 3 + 2] = row[c * bytes + 0];
        }
    }
    return rgb8_to_tensor(rgb, h, w);
}

} // namespace

Tensor<float> load_image(const std::string& path) {
    require(std::filesystem::exists(path), Status::kIo, "no such file: " + path);
    std::uint8_t magic[4] = {0, 0, 0, 0};
    {
        FilePtr f = open_file(path, "rb");
        require(std::fread(magic, 1, 4, f.get()) >= 2, Status::kIo, "empty file: " + path);
    }
    if (magic[0] == 0x89 && magic[1] == 'P') return load_png_file(path);
    if (magic[0] == 0xff && magic[1] == 0xd8) return load_jpeg_file(path);
    if (magic[0] == 'B' && magic[1] == 'M') return load_bmp_file(path);
    fail(Status::kIo, "unrecognized image format: " + path);
}

std::uint8_t quantize_pixel(float v) {
    const double x = (static_cast<double>(v) + 1.0) * 127.5;
    // Round half away from zero; x is non-negative after the shift for any
    // in-range value, negatives only occur below -1 and clamp to 0 anyway.
    const double r = std::floor(x + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

void save_png(const std::string& path, const Tensor<float>& image) {
    require(image.rank() == 3 && image.dim(2) == 3, Status::kInvalidArgument,
            "save_png: expected an HxWx3 image");
    const int h = image.dim(0), w = image.dim(1);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
    for (std::int64_t i = 0; i < image.numel(); ++i)
        rgb[static_cast<std::size_t>(i)] = quantize_pixel(image[i]);

    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, Status::kInternal, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(Status::kInternal, "libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(Status::kIo, "failed to write PNG: " + path);
    }
    png_init_io(png, f.get());
    // Fixed settings keep encoded bytes reproducible across runs.
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < h; ++r)
        png_write_row(png, rgb.data() + static_cast<std::size_t>(r) * w * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace arbiscale
