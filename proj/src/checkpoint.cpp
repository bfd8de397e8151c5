#include "atlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace atlab {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("corrupted checkpoint: truncated ") + what);
  return v;
}

void write_f32_blob(std::ostream& os, const ArrayX& a) {
  std::vector<float> buf(static_cast<std::size_t>(a.size()));
  for (Index i = 0; i < a.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(a[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_f32_blob(std::istream& is, ArrayX& a) {
  std::vector<float> buf(static_cast<std::size_t>(a.size()));
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!is) throw FormatError("corrupted checkpoint: truncated parameter blob");
  for (Index i = 0; i < a.size(); ++i) a[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]);
}

}  // namespace

void save_model(const NetworkModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path);
  os.write("ATLB", 4);
  write_raw<std::uint16_t>(os, kCheckpointVersion);
  const std::string arch = model.architecture_string();
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(arch.size()));
  os.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  for (const auto& p : model.params()) {
    write_f32_blob(os, p.weight);
    write_f32_blob(os, p.bias);
  }
  if (!os) throw FormatError("checkpoint write failed: " + path);
}

NetworkModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ATLB", 4) != 0)
    throw FormatError("corrupted checkpoint header (bad magic): " + path);
  const auto version = read_raw<std::uint16_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version mismatch: have " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  const auto arch_len = read_raw<std::uint32_t>(is, "architecture length");
  std::string arch(arch_len, '\0');
  is.read(arch.data(), arch_len);
  if (!is) throw FormatError("corrupted checkpoint: truncated architecture string");

  std::vector<LayerSpec> layers;
  std::vector<Index> input_shape;
  int num_classes = 0;
  architecture_from_string(arch, &layers, &input_shape, &num_classes);
  NetworkModel model(layers, input_shape, num_classes);
  for (auto& p : model.params()) {
    read_f32_blob(is, p.weight);
    read_f32_blob(is, p.bias);
  }
  is.peek();
  if (!is.eof()) throw FormatError("corrupted checkpoint: trailing bytes in " + path);
  return model;
}

}  // namespace atlab
