#include "ctcig/image/image.hpp"

#include <png.h>

#include <cstring>
#include <numeric>

namespace ctcig::image {

int64_t BinaryImage::area() const {
  return std::accumulate(bits.begin(), bits.end(), int64_t{0});
}

torch::Tensor to_tensor(const RgbImage& img, torch::ScalarType dtype) {
  auto t = torch::from_blob(const_cast<uint8_t*>(img.pixels.data()), {img.height, img.width, 3},
                            torch::kUInt8)
               .permute({2, 0, 1})
               .to(dtype);
  return t / 127.5 - 1.0;
}

RgbImage from_tensor(const torch::Tensor& t) {
  auto x = t.dim() == 4 ? t.squeeze(0) : t;
  if (x.dim() != 3 || x.size(0) != 3) throw DimensionError("from_tensor expects (3,H,W), got " + shape_str(t));
  auto u8 = ((x.detach().to(torch::kDouble).clamp(-1.0, 1.0) + 1.0) * 127.5)
                .round()
                .to(torch::kUInt8)
                .permute({1, 2, 0})
                .contiguous();
  RgbImage img(x.size(2), x.size(1));
  std::memcpy(img.pixels.data(), u8.data_ptr<uint8_t>(), img.pixels.size());
  return img;
}

torch::Tensor to_tensor(const BinaryImage& m, torch::ScalarType dtype) {
  return torch::from_blob(const_cast<uint8_t*>(m.bits.data()), {1, m.height, m.width}, torch::kUInt8)
      .to(dtype);
}

namespace {

std::vector<uint8_t> read_png(const std::filesystem::path& path, uint32_t format, int64_t& w,
                              int64_t& h) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IngestionError("cannot read PNG '" + path.string() + "': " + image.message);
  image.format = format;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IngestionError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  w = image.width;
  h = image.height;
  return buf;
}

png_image make_write_image(int64_t w, int64_t h, uint32_t format) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  return image;
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  RgbImage img;
  img.pixels = read_png(path, PNG_FORMAT_RGB, img.width, img.height);
  return img;
}

BinaryImage read_png_mask(const std::filesystem::path& path, int threshold) {
  int64_t w = 0, h = 0;
  auto gray = read_png(path, PNG_FORMAT_GRAY, w, h);
  BinaryImage m(w, h);
  for (size_t i = 0; i < gray.size(); ++i) m.bits[i] = gray[i] >= threshold ? 1 : 0;
  return m;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  auto image = make_write_image(img.width, img.height, PNG_FORMAT_RGB);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
    throw Error("cannot write PNG '" + path.string() + "': " + image.message);
}

void write_png(const std::filesystem::path& path, const BinaryImage& mask) {
  std::vector<uint8_t> gray(mask.bits.size());
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
  auto image = make_write_image(mask.width, mask.height, PNG_FORMAT_GRAY);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, gray.data(), 0, nullptr))
    throw Error("cannot write PNG '" + path.string() + "': " + image.message);
}

std::string encode_png(const RgbImage& img) {
  auto image = make_write_image(img.width, img.height, PNG_FORMAT_RGB);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
    throw Error(std::string("PNG size query failed: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
    throw Error(std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

RgbImage decode_png(const std::string& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(std::string("cannot decode PNG: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  RgbImage img(image.width, image.height);
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(std::string("cannot decode PNG: ") + image.message);
  }
  return img;
}

}  // namespace ctcig::image
