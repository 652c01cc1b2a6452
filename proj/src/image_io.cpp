#include "snnsir/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace snnsir {

namespace {

constexpr unsigned char kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32be(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>(v & 0xff));
}

uint32_t get_u32be(const unsigned char* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
  put_u32be(out, static_cast<uint32_t>(data.size()));
  const size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + type_at, static_cast<uInt>(4 + data.size())));
  put_u32be(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void save_png(const std::string& path, const Tensor& image) {
  if (image.ndim() != 3 || (image.dim(0) != 3 && image.dim(0) != 1)) {
    throw ShapeError("save_png: expected [3,H,W] or [1,H,W], got " +
                     shape_str(image.shape()));
  }
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto v = image.data();
  std::vector<unsigned char> raw(static_cast<size_t>(h) * (3 * w + 1));
  size_t at = 0;
  for (int64_t y = 0; y < h; ++y) {
    raw[at++] = 0;  // filter: none
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t ch = 0; ch < 3; ++ch) {
        const int64_t src = c == 3 ? ch : 0;
        const double val = std::clamp(v[(src * h + y) * w + x], 0.0, 1.0);
        raw[at++] = static_cast<unsigned char>(std::floor(val * 255.0 + 0.5));
      }
    }
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK) {
    throw IoError("save_png: deflate failed");
  }
  compressed.resize(bound);

  std::vector<unsigned char> file;
  file.insert(file.end(), kSignature, kSignature + 8);
  std::vector<unsigned char> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(w));
  put_u32be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", compressed);
  append_chunk(file, "IEND", {});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_png: cannot open '" + path + "'");
  os.write(reinterpret_cast<const char*>(file.data()),
           static_cast<std::streamsize>(file.size()));
  if (!os) throw IoError("save_png: write failed for '" + path + "'");
}

Tensor load_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_png: cannot open '" + path + "'");
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0) {
    throw DecodeError("load_png: '" + path + "' is not a PNG");
  }

  int64_t w = 0, h = 0;
  int color_type = -1;
  std::vector<unsigned char> idat;
  size_t at = 8;
  bool saw_end = false;
  while (at + 12 <= file.size()) {
    const uint32_t len = get_u32be(file.data() + at);
    if (len > (1u << 30) || at + 12 + len > file.size()) {
      throw DecodeError("load_png: corrupt chunk length");
    }
    const char* type = reinterpret_cast<const char*>(file.data() + at + 4);
    const unsigned char* data = file.data() + at + 8;
    const uint32_t stored_crc = get_u32be(data + len);
    const uint32_t crc =
        static_cast<uint32_t>(::crc32(0, file.data() + at + 4, 4 + len));
    if (crc != stored_crc) throw DecodeError("load_png: CRC mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw DecodeError("load_png: bad IHDR");
      w = get_u32be(data);
      h = get_u32be(data + 4);
      const int depth = data[8];
      color_type = data[9];
      if (depth != 8) throw DecodeError("load_png: only 8-bit PNGs supported");
      if (color_type != 0 && color_type != 2 && color_type != 6) {
        throw DecodeError("load_png: unsupported color type " + std::to_string(color_type));
      }
      if (data[12] != 0) throw DecodeError("load_png: interlaced PNGs unsupported");
      if (w <= 0 || h <= 0) throw DecodeError("load_png: empty image");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
      break;
    }
    at += 12 + len;
  }
  if (!saw_end || color_type < 0 || idat.empty()) {
    throw DecodeError("load_png: truncated file");
  }

  const int channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
  const int64_t stride = w * channels + 1;
  std::vector<unsigned char> raw(static_cast<size_t>(stride * h));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      raw_len != raw.size()) {
    throw DecodeError("load_png: inflate failed");
  }

  // Undo per-row filters in place.
  const int bpp = channels;
  for (int64_t y = 0; y < h; ++y) {
    unsigned char* row = raw.data() + y * stride;
    const unsigned char* prev = y > 0 ? raw.data() + (y - 1) * stride : nullptr;
    const int filt = row[0];
    unsigned char* px = row + 1;
    const unsigned char* up = prev ? prev + 1 : nullptr;
    const int64_t n = w * channels;
    switch (filt) {
      case 0:
        break;
      case 1:
        for (int64_t i = bpp; i < n; ++i) px[i] = static_cast<unsigned char>(px[i] + px[i - bpp]);
        break;
      case 2:
        if (up) {
          for (int64_t i = 0; i < n; ++i) px[i] = static_cast<unsigned char>(px[i] + up[i]);
        }
        break;
      case 3:
        for (int64_t i = 0; i < n; ++i) {
          const int a = i >= bpp ? px[i - bpp] : 0;
          const int b = up ? up[i] : 0;
          px[i] = static_cast<unsigned char>(px[i] + (a + b) / 2);
        }
        break;
      case 4:
        for (int64_t i = 0; i < n; ++i) {
          const int a = i >= bpp ? px[i - bpp] : 0;
          const int b = up ? up[i] : 0;
          const int cc = (up && i >= bpp) ? up[i - bpp] : 0;
          px[i] = static_cast<unsigned char>(px[i] + paeth(a, b, cc));
        }
        break;
      default:
        throw DecodeError("load_png: unknown filter type " + std::to_string(filt));
    }
  }

  std::vector<double> out(static_cast<size_t>(3 * h * w));
  for (int64_t y = 0; y < h; ++y) {
    const unsigned char* px = raw.data() + y * stride + 1;
    for (int64_t x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const int src = channels == 1 ? 0 : ch;
        out[(ch * h + y) * w + x] = px[x * channels + src] / 255.0;
      }
    }
  }
  return Tensor::from_vector({3, h, w}, std::move(out));
}

void save_heatmap_png(const std::string& path, const std::vector<double>& values,
                      int64_t height, int64_t width) {
  if (static_cast<int64_t>(values.size()) != height * width) {
    throw ShapeError("save_heatmap_png: value count does not match dimensions");
  }
  std::vector<double> rgb(static_cast<size_t>(3 * height * width));
  for (int64_t i = 0; i < height * width; ++i) {
    const double t = std::clamp(values[i], 0.0, 1.0);
    double r, g, b;
    if (t < 0.5) {  // blue -> white
      const double u = t * 2.0;
      r = u;
      g = u;
      b = 1.0;
    } else {  // white -> red
      const double u = (t - 0.5) * 2.0;
      r = 1.0;
      g = 1.0 - u;
      b = 1.0 - u;
    }
    rgb[i] = r;
    rgb[height * width + i] = g;
    rgb[2 * height * width + i] = b;
  }
  save_png(path, Tensor::from_vector({3, height, width}, std::move(rgb)));
}

}  // namespace snnsir
