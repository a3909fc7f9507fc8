#include "psir/png_io.hpp"

#include "psir/imageops.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

namespace psir {

void write_png_gray8(const std::filesystem::path& path, const RealImage& img,
                     double window_lo, double window_hi) {
  if (!(window_hi > window_lo)) throw ValueError("png: empty window");

  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(
      std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw Error("png: cannot open for write: " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: info allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: write failed: " + path.string());
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols),
               static_cast<png_uint_32>(img.rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);

  char window_buf[96];
  std::snprintf(window_buf, sizeof(window_buf), "lo=%.9g hi=%.9g", window_lo,
                window_hi);
  char key_buf[] = "window";
  png_text text;
  text.compression = PNG_TEXT_COMPRESSION_NONE;
  text.key = key_buf;
  text.text = window_buf;
  text.text_length = std::char_traits<char>::length(window_buf);
  png_set_text(png, info, &text, 1);

  png_write_info(png, info);

  const double scale = 255.0 / (window_hi - window_lo);
  std::vector<png_byte> row(img.cols);
  for (Index r = 0; r < img.rows; ++r) {
    for (Index c = 0; c < img.cols; ++c) {
      const double v = (img(r, c) - window_lo) * scale;
      row[c] = static_cast<png_byte>(std::clamp(v, 0.0, 255.0) + 0.5);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

std::pair<double, double> write_png_percentile(const std::filesystem::path& path,
                                               const RealImage& img) {
  double lo = percentile(img.data, 1.0);
  double hi = percentile(img.data, 99.0);
  if (hi <= lo) hi = lo + 1.0; // flat image still exports
  write_png_gray8(path, img, lo, hi);
  return {lo, hi};
}

} // namespace psir
