#include "wmlab/png_io.hpp"

#include "wmlab/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <vector>

namespace wmlab {

namespace {

// libpng reports errors through longjmp, so everything touched between
// setjmp and a possible longjmp below is plain data.
struct PngContext {
  char message[256] = {0};
  const unsigned char *data = nullptr;
  std::size_t size = 0;
  std::size_t offset = 0;
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto *ctx = static_cast<PngContext *>(png_get_error_ptr(png));
  if (ctx != nullptr) {
    std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  }
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void on_png_read(png_structp png, png_bytep out, png_size_t n) {
  auto *ctx = static_cast<PngContext *>(png_get_io_ptr(png));
  if (ctx->offset + n > ctx->size) {
    png_error(png, "unexpected end of stream");
  }
  std::memcpy(out, ctx->data + ctx->offset, n);
  ctx->offset += n;
}

struct HeaderInfo {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  bool has_trns = false;
  std::size_t rowbytes = 0;
  int channels = 0;
};

bool read_header(png_structp png, png_infop info, HeaderInfo *h) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_read_info(png, info);
  h->width = png_get_image_width(png, info);
  h->height = png_get_image_height(png, info);
  h->bit_depth = png_get_bit_depth(png, info);
  h->color_type = png_get_color_type(png, info);
  h->has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  return true;
}

bool configure_transforms(png_structp png, png_infop info, HeaderInfo *h) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  if (h->color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (h->color_type == PNG_COLOR_TYPE_GRAY) {
    if (h->bit_depth < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    png_set_gray_to_rgb(png);
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  h->rowbytes = png_get_rowbytes(png, info);
  h->channels = png_get_channels(png, info);
  return true;
}

bool read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

bool write_all(png_structp png, png_infop info, std::FILE *fp, png_uint_32 width,
               png_uint_32 height, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) {
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

struct ReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~ReadGuard() {
    if (png != nullptr) {
      png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
    }
  }
};

struct WriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE *fp = nullptr;
  ~WriteGuard() {
    if (png != nullptr) {
      png_destroy_write_struct(&png, info != nullptr ? &info : nullptr);
    }
    if (fp != nullptr) {
      std::fclose(fp);
    }
  }
};

} // namespace

ColorImage load_image(const std::filesystem::path &path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ImageIoError(IoErrc::missing_file, "no such image file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ImageIoError(IoErrc::missing_file, "cannot open image file: " + path.string());
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageIoError(IoErrc::corrupt_stream, "not a PNG stream: " + path.string());
  }

  PngContext ctx;
  ctx.data = bytes.data();
  ctx.size = bytes.size();

  ReadGuard guard;
  guard.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, on_png_error, on_png_warning);
  if (guard.png == nullptr) {
    throw ImageIoError(IoErrc::corrupt_stream, "libpng initialisation failed");
  }
  guard.info = png_create_info_struct(guard.png);
  if (guard.info == nullptr) {
    throw ImageIoError(IoErrc::corrupt_stream, "libpng initialisation failed");
  }
  png_set_read_fn(guard.png, &ctx, on_png_read);

  HeaderInfo h;
  if (!read_header(guard.png, guard.info, &h)) {
    throw ImageIoError(IoErrc::corrupt_stream,
                       "corrupt PNG header in " + path.string() + ": " + ctx.message);
  }
  if (h.bit_depth == 16) {
    throw ImageIoError(IoErrc::unsupported_format,
                       "unsupported bit depth 16 in " + path.string());
  }
  if ((h.color_type & PNG_COLOR_MASK_ALPHA) != 0 || h.has_trns) {
    throw ImageIoError(IoErrc::unsupported_format, "alpha channel present in " + path.string());
  }
  if (!configure_transforms(guard.png, guard.info, &h)) {
    throw ImageIoError(IoErrc::corrupt_stream,
                       "corrupt PNG stream in " + path.string() + ": " + ctx.message);
  }
  if (h.channels != 3) {
    throw ImageIoError(IoErrc::unsupported_format, "unsupported PNG layout in " + path.string());
  }

  std::vector<unsigned char> pixels(h.rowbytes * h.height);
  std::vector<png_bytep> rows(h.height);
  for (png_uint_32 y = 0; y < h.height; ++y) {
    rows[y] = pixels.data() + y * h.rowbytes;
  }
  if (!read_rows(guard.png, rows.data())) {
    throw ImageIoError(IoErrc::corrupt_stream,
                       "corrupt PNG stream in " + path.string() + ": " + ctx.message);
  }

  const int width = static_cast<int>(h.width);
  const int height = static_cast<int>(h.height);
  ColorImage img(width, height, ColorSpace::RGB);
  for (int y = 0; y < height; ++y) {
    const unsigned char *row = rows[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.planes[c].at(x, y) = row[3 * x + c] / 255.0;
      }
    }
  }
  return img;
}

void save_image(const ColorImage &img, const std::filesystem::path &path) {
  if (img.space != ColorSpace::RGB) {
    throw ColorSpaceError("save_image expects an RGB image");
  }
  const int width = img.width();
  const int height = img.height();
  if (width <= 0 || height <= 0) {
    throw DimensionError("cannot save an empty image");
  }
  std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.planes[c].at(x, y), 0.0, 1.0);
        pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  }

  WriteGuard guard;
  guard.fp = std::fopen(path.string().c_str(), "wb");
  if (guard.fp == nullptr) {
    throw ImageIoError(IoErrc::unwritable, "cannot write image file: " + path.string());
  }
  PngContext ctx;
  guard.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, on_png_error, on_png_warning);
  if (guard.png == nullptr) {
    throw ImageIoError(IoErrc::unwritable, "libpng initialisation failed");
  }
  guard.info = png_create_info_struct(guard.png);
  if (guard.info == nullptr) {
    throw ImageIoError(IoErrc::unwritable, "libpng initialisation failed");
  }
  if (!write_all(guard.png, guard.info, guard.fp, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), rows.data())) {
    throw ImageIoError(IoErrc::unwritable,
                       "failed writing " + path.string() + ": " + ctx.message);
  }
  if (std::fflush(guard.fp) != 0) {
    throw ImageIoError(IoErrc::unwritable, "failed flushing " + path.string());
  }
}

} // namespace wmlab
