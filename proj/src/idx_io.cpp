#include "atlab/idx_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace atlab {

namespace {

constexpr std::uint8_t kTypeU8 = 0x08;
constexpr std::uint8_t kTypeF64 = 0x0E;

std::uint32_t read_u32_be(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("truncated IDX header: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

double read_f64_be(std::istream& is, const std::string& path) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw FormatError("truncated IDX payload: " + path);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits = (bits << 8) | b[i];
  return std::bit_cast<double>(bits);
}

void write_f64_be(std::ostream& os, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct IdxHeader {
  std::uint8_t type = 0;
  std::vector<Index> dims;
};

IdxHeader read_header(std::istream& is, const std::string& path,
                      std::initializer_list<std::uint8_t> types,
                      std::initializer_list<int> ndims) {
  const std::uint32_t magic = read_u32_be(is, path);
  if ((magic & 0xFFFF0000u) != 0) throw FormatError("bad IDX magic in " + path);
  IdxHeader h;
  h.type = static_cast<std::uint8_t>((magic >> 8) & 0xFF);
  const int nd = static_cast<int>(magic & 0xFF);
  if (std::find(types.begin(), types.end(), h.type) == types.end())
    throw FormatError("unsupported IDX type code in " + path + ": " + std::to_string(h.type));
  if (std::find(ndims.begin(), ndims.end(), nd) == ndims.end())
    throw FormatError("unexpected IDX rank in " + path + ": " + std::to_string(nd));
  for (int i = 0; i < nd; ++i) h.dims.push_back(static_cast<Index>(read_u32_be(is, path)));
  return h;
}

}  // namespace

Tensor read_idx_images(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open IDX file: " + path);
  const IdxHeader h = read_header(is, path, {kTypeU8, kTypeF64}, {3, 4});
  std::vector<Index> shape = h.dims;
  if (shape.size() == 3) shape.insert(shape.begin() + 1, 1);
  Tensor t = Tensor::zeros(shape);
  if (h.type == kTypeU8) {
    std::vector<unsigned char> buf(static_cast<std::size_t>(t.size()));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw FormatError("truncated IDX payload: " + path);
    for (Index i = 0; i < t.size(); ++i)
      t.data[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]) / 255.0;
  } else {
    for (Index i = 0; i < t.size(); ++i) t.data[i] = read_f64_be(is, path);
  }
  return t;
}

std::vector<int> read_idx_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open IDX file: " + path);
  const IdxHeader h = read_header(is, path, {kTypeU8}, {1});
  std::vector<unsigned char> buf(static_cast<std::size_t>(h.dims[0]));
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw FormatError("truncated IDX label payload: " + path);
  return {buf.begin(), buf.end()};
}

LabeledDataset load_idx(const std::string& image_path, const std::string& label_path,
                        int num_classes_hint) {
  LabeledDataset ds;
  ds.images = read_idx_images(image_path);
  ds.labels = read_idx_labels(label_path);
  if (ds.images.rows() != static_cast<Index>(ds.labels.size()))
    throw FormatError("IDX image/label count mismatch: " + std::to_string(ds.images.rows()) +
                      " images vs " + std::to_string(ds.labels.size()) + " labels");
  int max_label = 0;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = num_classes_hint > 0 ? num_classes_hint : max_label + 1;
  ds.validate();
  return ds;
}

namespace {

void write_image_header(std::ostream& os, const Tensor& images, std::uint8_t type) {
  const bool single = images.dim(1) == 1;
  write_u32_be(os, (std::uint32_t(type) << 8) | (single ? 3u : 4u));
  write_u32_be(os, static_cast<std::uint32_t>(images.dim(0)));
  if (!single) write_u32_be(os, static_cast<std::uint32_t>(images.dim(1)));
  write_u32_be(os, static_cast<std::uint32_t>(images.dim(2)));
  write_u32_be(os, static_cast<std::uint32_t>(images.dim(3)));
}

}  // namespace

void write_idx_images_u8(const std::string& path, const Tensor& images) {
  if (images.ndim() != 4) throw std::invalid_argument("write_idx_images: tensor must be 4-D");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write IDX file: " + path);
  write_image_header(os, images, kTypeU8);
  std::vector<unsigned char> buf(static_cast<std::size_t>(images.size()));
  for (Index i = 0; i < images.size(); ++i) {
    const double v = std::clamp(images.data[i], 0.0, 1.0);
    buf[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FormatError("IDX write failed: " + path);
}

void write_idx_images_f64(const std::string& path, const Tensor& images) {
  if (images.ndim() != 4) throw std::invalid_argument("write_idx_images: tensor must be 4-D");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write IDX file: " + path);
  write_image_header(os, images, kTypeF64);
  for (Index i = 0; i < images.size(); ++i) write_f64_be(os, images.data[i]);
  if (!os) throw FormatError("IDX write failed: " + path);
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write IDX file: " + path);
  write_u32_be(os, (std::uint32_t(kTypeU8) << 8) | 1u);
  write_u32_be(os, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw std::invalid_argument("IDX labels must fit one byte");
    const auto b = static_cast<unsigned char>(y);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!os) throw FormatError("IDX write failed: " + path);
}

LabeledDataset load_cifar_binary(const std::vector<std::string>& paths) {
  constexpr Index kRecord = 3073;  // 1 label byte + 3*32*32 pixel bytes
  std::vector<unsigned char> bytes;
  for (const auto& path : paths) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw FormatError("cannot open CIFAR file: " + path);
    const auto len = static_cast<std::size_t>(is.tellg());
    if (len % static_cast<std::size_t>(kRecord) != 0)
      throw FormatError("CIFAR file " + path + " truncated at byte offset " +
                        std::to_string(len - len % static_cast<std::size_t>(kRecord)) +
                        " (record size 3073)");
    is.seekg(0);
    const auto prev = bytes.size();
    bytes.resize(prev + len);
    is.read(reinterpret_cast<char*>(bytes.data() + prev), static_cast<std::streamsize>(len));
    if (!is) throw FormatError("CIFAR read failed: " + path);
  }
  const Index n = static_cast<Index>(bytes.size()) / kRecord;
  LabeledDataset ds;
  ds.num_classes = 10;
  ds.images = Tensor::zeros({n, 3, 32, 32});
  ds.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kRecord;
    ds.labels[static_cast<std::size_t>(i)] = rec[0];
    for (Index p = 0; p < 3072; ++p)
      ds.images.data[i * 3072 + p] = static_cast<double>(rec[1 + p]) / 255.0;
  }
  if (n > 0) ds.validate();
  return ds;
}

}  // namespace atlab
