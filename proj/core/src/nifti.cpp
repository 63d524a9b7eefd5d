#include "bsca/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace bsca {

namespace {

// NIfTI-1: 348-byte header; the fields this reader uses.
constexpr int kHeaderSize = 348;
constexpr int kOffSizeofHdr = 0;    // int32, must be 348
constexpr int kOffDim = 40;         // int16[8]
constexpr int kOffDatatype = 70;    // int16
constexpr int kOffBitpix = 72;      // int16
constexpr int kOffPixdim = 76;      // float[8]
constexpr int kOffVoxOffset = 108;  // float
constexpr int kOffSclSlope = 112;   // float
constexpr int kOffSclInter = 116;   // float
constexpr int kOffMagic = 344;      // char[4], "n+1\0" for single-file

std::uint16_t swap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }
std::uint32_t swap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

struct HeaderView {
  const unsigned char* bytes;
  bool swapped;

  std::int16_t i16(int offset) const {
    std::uint16_t v;
    std::memcpy(&v, bytes + offset, 2);
    if (swapped) v = swap16(v);
    return std::bit_cast<std::int16_t>(v);
  }
  std::int32_t i32(int offset) const {
    std::uint32_t v;
    std::memcpy(&v, bytes + offset, 4);
    if (swapped) v = swap32(v);
    return std::bit_cast<std::int32_t>(v);
  }
  float f32(int offset) const {
    std::uint32_t v;
    std::memcpy(&v, bytes + offset, 4);
    if (swapped) v = swap32(v);
    return std::bit_cast<float>(v);
  }
};

int dtype_size(std::int16_t code) {
  switch (static_cast<NiftiDtype>(code)) {
    case NiftiDtype::u8: return 1;
    case NiftiDtype::i16: return 2;
    case NiftiDtype::f32: return 4;
  }
  return 0;
}

}  // namespace

Volume load_nifti(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open volume: " + path);

  unsigned char hdr[kHeaderSize];
  is.read(reinterpret_cast<char*>(hdr), kHeaderSize);
  if (is.gcount() != kHeaderSize) {
    throw DataError(path + ": truncated header (" + std::to_string(is.gcount()) + " of 348 bytes)");
  }

  // Byte order is detected from sizeof_hdr; the magic confirms the format.
  std::int32_t size_native;
  std::memcpy(&size_native, hdr + kOffSizeofHdr, 4);
  bool swapped = false;
  if (size_native != kHeaderSize) {
    if (std::bit_cast<std::int32_t>(swap32(std::bit_cast<std::uint32_t>(size_native))) ==
        kHeaderSize) {
      swapped = true;
    } else {
      throw DataError(path + ": bad magic, not a NIfTI-1 file");
    }
  }
  HeaderView view{hdr, swapped};

  const char* magic = reinterpret_cast<const char*>(hdr + kOffMagic);
  if (std::memcmp(magic, "n+1", 4) != 0) {
    if (std::memcmp(magic, "ni1", 4) == 0) {
      throw DataError(path + ": header/image pairs (.hdr/.img) are not supported");
    }
    throw DataError(path + ": bad magic, not a NIfTI-1 file");
  }

  const std::int16_t ndim = view.i16(kOffDim);
  if (ndim < 3 || ndim > 7) {
    throw DataError(path + ": need a 3-D volume, header declares " + std::to_string(ndim) +
                    " dimensions");
  }
  for (int d = 4; d <= ndim; ++d) {
    if (view.i16(kOffDim + 2 * d) > 1) {
      throw DataError(path + ": volumes with a non-trivial dimension " + std::to_string(d) +
                      " are not supported");
    }
  }

  Volume vol;
  for (int d = 0; d < 3; ++d) {
    const std::int16_t extent = view.i16(kOffDim + 2 * (d + 1));
    if (extent < 1) {
      throw DataError(path + ": non-positive extent for dimension " + std::to_string(d + 1));
    }
    vol.dims[static_cast<std::size_t>(d)] = extent;
    const float px = view.f32(kOffPixdim + 4 * (d + 1));
    vol.spacing[static_cast<std::size_t>(d)] = (px > 0.0f && std::isfinite(px)) ? px : 1.0f;
  }

  const std::int16_t datatype = view.i16(kOffDatatype);
  const int sample_size = dtype_size(datatype);
  if (sample_size == 0) {
    throw DataError(path + ": unsupported datatype code " + std::to_string(datatype));
  }

  float vox_offset = view.f32(kOffVoxOffset);
  if (!(vox_offset >= kHeaderSize)) vox_offset = 352.0f;
  is.seekg(static_cast<std::streamoff>(vox_offset), std::ios::beg);

  const std::int64_t count = vol.voxel_count();
  std::vector<unsigned char> raw(static_cast<std::size_t>(count) * sample_size);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw DataError(path + ": truncated payload, expected " + std::to_string(raw.size()) +
                    " bytes of voxel data");
  }

  vol.data.resize(static_cast<std::size_t>(count));
  switch (static_cast<NiftiDtype>(datatype)) {
    case NiftiDtype::u8:
      for (std::int64_t i = 0; i < count; ++i) {
        vol.data[static_cast<std::size_t>(i)] = raw[static_cast<std::size_t>(i)];
      }
      break;
    case NiftiDtype::i16:
      for (std::int64_t i = 0; i < count; ++i) {
        std::uint16_t v;
        std::memcpy(&v, raw.data() + static_cast<std::size_t>(i) * 2, 2);
        if (swapped) v = swap16(v);
        vol.data[static_cast<std::size_t>(i)] = std::bit_cast<std::int16_t>(v);
      }
      break;
    case NiftiDtype::f32:
      for (std::int64_t i = 0; i < count; ++i) {
        std::uint32_t v;
        std::memcpy(&v, raw.data() + static_cast<std::size_t>(i) * 4, 4);
        if (swapped) v = swap32(v);
        vol.data[static_cast<std::size_t>(i)] = std::bit_cast<float>(v);
      }
      break;
  }

  const float slope = view.f32(kOffSclSlope);
  const float inter = view.f32(kOffSclInter);
  if (slope != 0.0f && !(slope == 1.0f && inter == 0.0f)) {
    for (float& v : vol.data) v = v * slope + inter;
  }
  return vol;
}

void save_nifti(const Volume& vol, const std::string& path, NiftiDtype dtype, bool big_endian) {
  if (vol.voxel_count() != static_cast<std::int64_t>(vol.data.size())) {
    throw DataError("volume data length does not match its dimensions");
  }
  unsigned char hdr[kHeaderSize] = {};
  auto put_i16 = [&](int offset, std::int16_t value) {
    std::uint16_t v = std::bit_cast<std::uint16_t>(value);
    if (big_endian) v = swap16(v);
    std::memcpy(hdr + offset, &v, 2);
  };
  auto put_i32 = [&](int offset, std::int32_t value) {
    std::uint32_t v = std::bit_cast<std::uint32_t>(value);
    if (big_endian) v = swap32(v);
    std::memcpy(hdr + offset, &v, 4);
  };
  auto put_f32 = [&](int offset, float value) {
    std::uint32_t v = std::bit_cast<std::uint32_t>(value);
    if (big_endian) v = swap32(v);
    std::memcpy(hdr + offset, &v, 4);
  };

  put_i32(kOffSizeofHdr, kHeaderSize);
  put_i16(kOffDim, 3);
  for (int d = 0; d < 3; ++d) {
    put_i16(kOffDim + 2 * (d + 1), static_cast<std::int16_t>(vol.dims[static_cast<std::size_t>(d)]));
    put_f32(kOffPixdim + 4 * (d + 1), vol.spacing[static_cast<std::size_t>(d)]);
  }
  for (int d = 4; d <= 7; ++d) put_i16(kOffDim + 2 * d, 1);
  put_i16(kOffDatatype, static_cast<std::int16_t>(dtype));
  put_i16(kOffBitpix, static_cast<std::int16_t>(8 * dtype_size(static_cast<std::int16_t>(dtype))));
  put_f32(kOffPixdim, 1.0f);
  put_f32(kOffVoxOffset, 352.0f);
  put_f32(kOffSclSlope, 1.0f);
  put_f32(kOffSclInter, 0.0f);
  std::memcpy(hdr + kOffMagic, "n+1", 4);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open volume for writing: " + path);
  os.write(reinterpret_cast<const char*>(hdr), kHeaderSize);
  const char pad[4] = {};
  os.write(pad, 4);  // vox_offset 352

  for (float value : vol.data) {
    switch (dtype) {
      case NiftiDtype::u8: {
        os.put(static_cast<char>(static_cast<unsigned char>(value)));
        break;
      }
      case NiftiDtype::i16: {
        std::uint16_t v = std::bit_cast<std::uint16_t>(static_cast<std::int16_t>(value));
        if (big_endian) v = swap16(v);
        os.write(reinterpret_cast<const char*>(&v), 2);
        break;
      }
      case NiftiDtype::f32: {
        std::uint32_t v = std::bit_cast<std::uint32_t>(value);
        if (big_endian) v = swap32(v);
        os.write(reinterpret_cast<const char*>(&v), 4);
        break;
      }
    }
  }
  os.flush();
  if (!os) throw DataError("failed writing volume: " + path);
}

}  // namespace bsca
