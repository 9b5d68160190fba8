#include "guiguard/image.hpp"

#include <algorithm>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "guiguard/error.hpp"

namespace guiguard {

double luminance(Rgb c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::kInvalidArgument, "negative image size");
  data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

PixelRect to_pixels(const BoundingBox& box, int width, int height) {
  auto lo = [](int v, int size) {
    return std::clamp(static_cast<int>(static_cast<long>(v) * size / kGridMax), 0, size);
  };
  auto hi = [](int v, int size) {
    return std::clamp(static_cast<int>((static_cast<long>(v) * size + kGridMax - 1) / kGridMax), 0, size);
  };
  PixelRect r{lo(box.x1, width), lo(box.y1, height), hi(box.x2, width), hi(box.y2, height)};
  if (r.width() <= 0 || r.height() <= 0) {
    throw Error(ErrorCode::kRegionOutOfBounds, "region has zero pixel area in a " +
                                                   std::to_string(width) + "x" +
                                                   std::to_string(height) + " image");
  }
  return r;
}

Image decode_image(std::span<const std::uint8_t> encoded) {
  if (encoded.empty()) throw Error(ErrorCode::kImageDecode, "empty image data");
  const cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(encoded.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorCode::kImageDecode, "not a decodable PNG/JPEG image");
  Image img(bgr.cols, bgr.rows);
  cv::Mat rgb(bgr.rows, bgr.cols, CV_8UC3, img.bytes().data());
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return img;
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty image");
  const cv::Mat rgb(image.height(), image.width(), CV_8UC3,
                    const_cast<std::uint8_t*>(image.bytes().data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) throw Error(ErrorCode::kIoFailure, "PNG encoding failed");
  return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_png(image));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

std::string sniff_mime(std::span<const std::uint8_t> encoded) {
  if (encoded.size() >= 3 && encoded[0] == 0xFF && encoded[1] == 0xD8 && encoded[2] == 0xFF) {
    return "image/jpeg";
  }
  return "image/png";
}

}  // namespace guiguard
