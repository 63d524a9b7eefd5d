#include "bsca/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <utility>
#include <vector>

namespace bsca {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'C', 'A', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagOptimizerState = 1u;
constexpr std::uint8_t kDtypeF32 = 0;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) {
  put_u32(os, std::bit_cast<std::uint32_t>(v));
}

bool get_bytes(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

std::uint32_t get_u32(std::istream& is, const char* ctx) {
  unsigned char b[4];
  if (!get_bytes(is, b, 4)) throw DataError(std::string("checkpoint truncated reading ") + ctx);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is, const char* ctx) {
  const std::uint64_t lo = get_u32(is, ctx);
  const std::uint64_t hi = get_u32(is, ctx);
  return lo | (hi << 32);
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  os.put(static_cast<char>(kDtypeF32));
  os.put(static_cast<char>(t.ndim()));
  for (int d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
  for (std::int64_t i = 0; i < t.numel(); ++i) put_f32(os, t[i]);
}

}  // namespace

void save_weights(const Network& net, const std::string& path, int image_size,
                  bool with_optimizer) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);

  std::vector<std::pair<std::string, const Tensor*>> entries;
  for_each_param(net, [&entries](const std::string& name, const Tensor& value, const Tensor&,
                                 const Tensor&) { entries.emplace_back(name, &value); });
  for_each_bn(net, [&entries](const std::string& name, const BatchNormLayer& bn) {
    entries.emplace_back(name + ".running_mean", &bn.state.running_mean);
    entries.emplace_back(name + ".running_var", &bn.state.running_var);
  });
  if (with_optimizer) {
    for_each_param(net, [&entries](const std::string& name, const Tensor&, const Tensor& m,
                                   const Tensor& v) {
      entries.emplace_back("adam.m." + name, &m);
      entries.emplace_back("adam.v." + name, &v);
    });
  }

  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kVersion);
  put_u32(os, with_optimizer ? kFlagOptimizerState : 0u);
  put_u32(os, static_cast<std::uint32_t>(image_size));
  put_u64(os, with_optimizer ? net.step_count : 0u);
  put_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) put_tensor(os, name, *tensor);
  os.flush();
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);

  char magic[8];
  if (!get_bytes(is, magic, sizeof(magic))) throw DataError("checkpoint truncated reading magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  const std::uint32_t version = get_u32(is, "version");
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t flags = get_u32(is, "flags");
  const std::uint32_t image_size = get_u32(is, "image size");
  const std::uint64_t step_count = get_u64(is, "step count");
  const std::uint32_t tensor_count = get_u32(is, "tensor count");

  std::map<std::string, Tensor> loaded;
  for (std::uint32_t e = 0; e < tensor_count; ++e) {
    const std::uint32_t name_len = get_u32(is, "entry name length");
    std::string name(name_len, '\0');
    if (!get_bytes(is, name.data(), name_len)) {
      throw DataError("checkpoint truncated reading entry name");
    }
    unsigned char dtype = 0, ndim = 0;
    if (!get_bytes(is, &dtype, 1) || !get_bytes(is, &ndim, 1)) {
      throw DataError("checkpoint truncated in entry " + name);
    }
    if (dtype != kDtypeF32) {
      throw DataError("checkpoint entry " + name + ": unsupported dtype code " +
                      std::to_string(dtype));
    }
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(get_u32(is, "entry shape"));
    const std::int64_t numel = shape_numel(shape);
    std::vector<float> data(static_cast<std::size_t>(numel));
    std::vector<unsigned char> raw(static_cast<std::size_t>(numel) * 4);
    if (!get_bytes(is, raw.data(), raw.size())) {
      throw DataError("checkpoint truncated in entry " + name);
    }
    for (std::int64_t i = 0; i < numel; ++i) {
      const std::size_t o = static_cast<std::size_t>(i) * 4;
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[o]) |
                                 (static_cast<std::uint32_t>(raw[o + 1]) << 8) |
                                 (static_cast<std::uint32_t>(raw[o + 2]) << 16) |
                                 (static_cast<std::uint32_t>(raw[o + 3]) << 24);
      data[static_cast<std::size_t>(i)] = std::bit_cast<float>(bits);
    }
    if (!loaded.emplace(name, Tensor::from(std::move(shape), std::move(data))).second) {
      throw DataError("checkpoint entry " + name + " appears twice");
    }
  }

  LoadedCheckpoint result;
  result.network = network_skeleton();
  result.image_size = static_cast<int>(image_size);
  result.has_optimizer_state = (flags & kFlagOptimizerState) != 0;
  result.network.step_count = step_count;

  auto take = [&loaded](const std::string& name, Tensor& dst) {
    auto it = loaded.find(name);
    if (it == loaded.end()) throw DataError("checkpoint missing entry " + name);
    if (it->second.shape() != dst.shape()) {
      throw DataError("checkpoint entry " + name + ": expected shape " + shape_str(dst.shape()) +
                      ", got " + shape_str(it->second.shape()));
    }
    dst = std::move(it->second);
    loaded.erase(it);
  };

  for_each_param(result.network,
                 [&take](const std::string& name, Tensor& value, Tensor&, Tensor&) {
                   take(name, value);
                 });
  for_each_bn(result.network, [&take](const std::string& name, BatchNormLayer& bn) {
    take(name + ".running_mean", bn.state.running_mean);
    take(name + ".running_var", bn.state.running_var);
  });
  if (result.has_optimizer_state) {
    for_each_param(result.network,
                   [&take](const std::string& name, Tensor&, Tensor& m, Tensor& v) {
                     take("adam.m." + name, m);
                     take("adam.v." + name, v);
                   });
  }
  if (!loaded.empty()) {
    throw DataError("checkpoint has unexpected entry " + loaded.begin()->first);
  }
  return result;
}

}  // namespace bsca
