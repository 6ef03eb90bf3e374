/*
 * Copyright 2026 The pedseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pedseg/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <type_traits>

namespace pedseg::nifti {
namespace {

constexpr Endian kHostEndian = std::endian::native == std::endian::little ? Endian::Little : Endian::Big;

template <class T>
T byteswap(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <class T>
T load(const std::byte* p, Endian e) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return e == kHostEndian ? v : byteswap(v);
}

template <class T>
void store(std::byte* p, T v, Endian e) {
  if (e != kHostEndian) v = byteswap(v);
  std::memcpy(p, &v, sizeof(T));
}

// Calls f(offset, field) for every header field in on-disk order.
template <class H, class F>
void visit_fields(H& h, F&& f) {
  f(0, h.sizeof_hdr);
  f(4, h.data_type);
  f(14, h.db_name);
  f(32, h.extents);
  f(36, h.session_error);
  f(38, h.regular);
  f(39, h.dim_info);
  f(40, h.dim);
  f(56, h.intent_p1);
  f(60, h.intent_p2);
  f(64, h.intent_p3);
  f(68, h.intent_code);
  f(70, h.datatype);
  f(72, h.bitpix);
  f(74, h.slice_start);
  f(76, h.pixdim);
  f(108, h.vox_offset);
  f(112, h.scl_slope);
  f(116, h.scl_inter);
  f(120, h.slice_end);
  f(122, h.slice_code);
  f(123, h.xyzt_units);
  f(124, h.cal_max);
  f(128, h.cal_min);
  f(132, h.slice_duration);
  f(136, h.toffset);
  f(140, h.glmax);
  f(144, h.glmin);
  f(148, h.descrip);
  f(228, h.aux_file);
  f(252, h.qform_code);
  f(254, h.sform_code);
  f(256, h.quatern_b);
  f(260, h.quatern_c);
  f(264, h.quatern_d);
  f(268, h.qoffset_x);
  f(272, h.qoffset_y);
  f(276, h.qoffset_z);
  f(280, h.srow_x);
  f(296, h.srow_y);
  f(312, h.srow_z);
  f(328, h.intent_name);
  f(344, h.magic);
}

template <class T>
struct is_std_array : std::false_type {};
template <class T, std::size_t N>
struct is_std_array<std::array<T, N>> : std::true_type {};

struct FieldReader {
  const std::byte* base;
  Endian endian;
  template <class T>
  void operator()(std::size_t offset, T& field) const {
    if constexpr (is_std_array<T>::value) {
      using E = typename T::value_type;
      for (std::size_t i = 0; i < field.size(); ++i) field[i] = load<E>(base + offset + i * sizeof(E), endian);
    } else {
      field = load<T>(base + offset, endian);
    }
  }
};

struct FieldWriter {
  std::byte* base;
  Endian endian;
  template <class T>
  void operator()(std::size_t offset, const T& field) const {
    if constexpr (is_std_array<T>::value) {
      using E = typename T::value_type;
      for (std::size_t i = 0; i < field.size(); ++i) store<E>(base + offset + i * sizeof(E), field[i], endian);
    } else {
      store<T>(base + offset, field, endian);
    }
  }
};

std::size_t bytes_per_voxel(Datatype dt) { return static_cast<std::size_t>(bits_per_voxel(dt) / 8); }

void validate_header(const Header& h) {
  if (h.magic == std::array<char, 4>{'n', 'i', '1', '\0'}) {
    fail(Errc::BadMagic, "two-file NIfTI (.hdr/.img) is not supported; expected single-file n+1");
  }
  if (h.magic != std::array<char, 4>{'n', '+', '1', '\0'}) fail(Errc::BadMagic, "not a NIfTI-1 single-file image");
  if (h.dim[0] < 1 || h.dim[0] > 7) fail(Errc::BadHeader, "dim[0] must be in 1..7, got " + std::to_string(h.dim[0]));
  for (int i = 1; i <= h.dim[0]; ++i) {
    if (h.dim[i] < 1) fail(Errc::BadHeader, "dim[" + std::to_string(i) + "] must be >= 1");
  }
  if (!is_supported(h.datatype)) {
    fail(Errc::UnsupportedDatatype, "unsupported NIfTI datatype code " + std::to_string(h.datatype));
  }
  if (h.bitpix != bits_per_voxel(static_cast<Datatype>(h.datatype))) {
    fail(Errc::BadHeader, "bitpix " + std::to_string(h.bitpix) + " inconsistent with datatype " +
                              std::to_string(h.datatype));
  }
  const float off = h.vox_offset;
  if (!std::isfinite(off) || off < static_cast<float>(kHeaderSize) || off != std::floor(off) || off > 1e9f) {
    fail(Errc::BadHeader, "invalid vox_offset");
  }
}

double scale_of(const Header& h) {
  return (h.scl_slope == 0.0f || !std::isfinite(h.scl_slope)) ? 1.0 : static_cast<double>(h.scl_slope);
}
double inter_of(const Header& h) {
  return (h.scl_slope == 0.0f || !std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter))
             ? 0.0
             : static_cast<double>(h.scl_inter);
}

template <class T>
void decode_into(const std::byte* p, std::size_t n, Endian e, double slope, double inter, bool identity,
                 std::vector<double>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = static_cast<double>(load<T>(p + i * sizeof(T), e));
    out[i] = identity ? raw : raw * slope + inter;
  }
}

template <class T>
void encode_from(std::byte* p, const std::vector<double>& in, Endian e, double slope, double inter,
                 bool identity) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = identity ? in[i] : (in[i] - inter) / slope;
    T stored;
    if constexpr (std::is_integral_v<T>) {
      const double r = std::nearbyint(v);
      if (!(r >= static_cast<double>(std::numeric_limits<T>::min()) &&
            r <= static_cast<double>(std::numeric_limits<T>::max()))) {
        fail(Errc::InvalidArgument, "value out of range for the NIfTI datatype");
      }
      stored = static_cast<T>(r);
    } else {
      stored = static_cast<T>(v);
    }
    store<T>(p + i * sizeof(T), stored, e);
  }
}

}  // namespace

bool is_supported(std::int16_t code) {
  switch (code) {
    case 2:
    case 4:
    case 8:
    case 16:
    case 64: return true;
    default: return false;
  }
}

int bits_per_voxel(Datatype dt) {
  switch (dt) {
    case Datatype::UInt8: return 8;
    case Datatype::Int16: return 16;
    case Datatype::Int32: return 32;
    case Datatype::Float32: return 32;
    case Datatype::Float64: return 64;
  }
  return 0;
}

std::size_t Header::element_count() const {
  std::size_t n = 1;
  for (int i = 1; i <= dim[0] && i < 8; ++i) n *= static_cast<std::size_t>(std::max<std::int16_t>(dim[i], 1));
  return n;
}

bool Header::scaling_is_identity() const { return scale_of(*this) == 1.0 && inter_of(*this) == 0.0; }

Image parse(std::span<const std::byte> bytes) {
  if (bytes.size() >= 2 && bytes[0] == std::byte{0x1f} && bytes[1] == std::byte{0x8b}) {
    const auto raw = gunzip(bytes);
    return parse(raw);
  }
  if (bytes.size() < kHeaderSize) {
    fail(Errc::TruncatedPayload, "stream holds " + std::to_string(bytes.size()) + " bytes, fewer than a header");
  }

  Endian endian;
  if (load<std::int32_t>(bytes.data(), Endian::Little) == 348) {
    endian = Endian::Little;
  } else if (load<std::int32_t>(bytes.data(), Endian::Big) == 348) {
    endian = Endian::Big;
  } else {
    fail(Errc::BadHeader, "sizeof_hdr is not 348 in either byte order (NIfTI-2 is not supported)");
  }

  Image img;
  visit_fields(img.header, FieldReader{bytes.data(), endian});
  img.header.source_endian = endian;
  validate_header(img.header);

  const Header& h = img.header;
  const auto dt = static_cast<Datatype>(h.datatype);
  const std::size_t bpv = bytes_per_voxel(dt);
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t available = bytes.size() > offset ? bytes.size() - offset : 0;
  // Compare against the remaining bytes before allocating anything.
  const std::size_t capacity = bytes.size() > offset ? (bytes.size() - offset) / bpv : 0;
  std::size_t n = 1;
  for (int i = 1; i <= h.dim[0]; ++i) {
    const auto d = static_cast<std::size_t>(h.dim[i]);
    if (d > capacity / n) {
      fail(Errc::TruncatedPayload, "payload shorter than the dims declare: stream has " +
                                       std::to_string(available) + " bytes after offset " + std::to_string(offset));
    }
    n *= d;
  }

  img.data.resize(n);
  const std::byte* p = bytes.data() + offset;
  const double slope = scale_of(h);
  const double inter = inter_of(h);
  const bool identity = h.scaling_is_identity();
  switch (dt) {
    case Datatype::UInt8: decode_into<std::uint8_t>(p, n, endian, slope, inter, identity, img.data); break;
    case Datatype::Int16: decode_into<std::int16_t>(p, n, endian, slope, inter, identity, img.data); break;
    case Datatype::Int32: decode_into<std::int32_t>(p, n, endian, slope, inter, identity, img.data); break;
    case Datatype::Float32: decode_into<float>(p, n, endian, slope, inter, identity, img.data); break;
    case Datatype::Float64: decode_into<double>(p, n, endian, slope, inter, identity, img.data); break;
  }
  return img;
}

std::vector<std::byte> write(const Image& image, const WriteOptions& options) {
  Header h = image.header;
  if (!is_supported(h.datatype)) fail(Errc::UnsupportedDatatype, "cannot write datatype " + std::to_string(h.datatype));
  const auto dt = static_cast<Datatype>(h.datatype);
  h.sizeof_hdr = 348;
  h.bitpix = static_cast<std::int16_t>(bits_per_voxel(dt));
  h.vox_offset = static_cast<float>(kDataOffset);
  h.magic = {'n', '+', '1', '\0'};
  if (h.dim[0] < 1 || h.dim[0] > 7) fail(Errc::InvalidArgument, "dim[0] must be in 1..7");
  if (h.element_count() != image.data.size()) {
    fail(Errc::InvalidArgument, "payload length does not match header dims");
  }

  const std::size_t bpv = bytes_per_voxel(dt);
  std::vector<std::byte> out(kDataOffset + image.data.size() * bpv, std::byte{0});
  visit_fields(h, FieldWriter{out.data(), options.endian});

  std::byte* p = out.data() + kDataOffset;
  const double slope = scale_of(h);
  const double inter = inter_of(h);
  const bool identity = h.scaling_is_identity();
  switch (dt) {
    case Datatype::UInt8: encode_from<std::uint8_t>(p, image.data, options.endian, slope, inter, identity); break;
    case Datatype::Int16: encode_from<std::int16_t>(p, image.data, options.endian, slope, inter, identity); break;
    case Datatype::Int32: encode_from<std::int32_t>(p, image.data, options.endian, slope, inter, identity); break;
    case Datatype::Float32: encode_from<float>(p, image.data, options.endian, slope, inter, identity); break;
    case Datatype::Float64: encode_from<double>(p, image.data, options.endian, slope, inter, identity); break;
  }
  return options.gzip ? gzip_compress(out) : out;
}

std::vector<std::byte> gzip_compress(std::span<const std::byte> raw) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    fail(Errc::IoError, "deflateInit2 failed");
  }
  std::vector<std::byte> out(deflateBound(&zs, static_cast<uLong>(raw.size())) + 32);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) fail(Errc::IoError, "gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

std::vector<std::byte> gunzip(std::span<const std::byte> compressed) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) fail(Errc::IoError, "inflateInit2 failed");
  std::vector<std::byte> out;
  std::array<std::byte, 1 << 16> chunk{};
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(chunk.data());
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      fail(Errc::TruncatedPayload, "gzip stream is corrupt or truncated");
    }
    const std::size_t produced = chunk.size() - zs.avail_out;
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(produced));
    if (rc == Z_OK && zs.avail_in == 0 && produced == 0) {
      inflateEnd(&zs);
      fail(Errc::TruncatedPayload, "gzip stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

Image read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* b = reinterpret_cast<const std::byte*>(buf.data());
  try {
    return parse(std::span<const std::byte>(b, buf.size()));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const Image& image) {
  WriteOptions opt;
  opt.gzip = path.extension() == ".gz";
  const auto bytes = write(image, opt);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::IoError, "short write to " + path.string());
}

namespace {

Dims spatial_dims(const Header& h) {
  for (int i = 4; i <= h.dim[0]; ++i) {
    if (h.dim[i] != 1) fail(Errc::InvalidArgument, "expected a 3D volume, dim[" + std::to_string(i) + "] > 1");
  }
  auto d = [&](int i) { return h.dim[0] >= i ? static_cast<int>(h.dim[i]) : 1; };
  return {d(1), d(2), d(3)};
}

Spacing spatial_spacing(const Header& h) {
  auto p = [&](int i) {
    if (h.dim[0] < i) return 1.0;
    const double v = std::fabs(static_cast<double>(h.pixdim[i]));
    if (!(v > 0.0) || !std::isfinite(v)) fail(Errc::BadHeader, "pixdim[" + std::to_string(i) + "] must be > 0");
    return v;
  };
  return {p(1), p(2), p(3)};
}

Header header_for(Dims d, Spacing s, Datatype dt, const Header* like) {
  if (d.nx > 32767 || d.ny > 32767 || d.nz > 32767) fail(Errc::InvalidArgument, "dims exceed the NIfTI-1 limit");
  Header h = like ? *like : Header{};
  h.dim = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny), static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  const float qfac = (like && like->pixdim[0] != 0.0f) ? like->pixdim[0] : 1.0f;
  h.pixdim = {qfac, static_cast<float>(s.dx), static_cast<float>(s.dy), static_cast<float>(s.dz), 0, 0, 0, 0};
  h.datatype = static_cast<std::int16_t>(dt);
  h.bitpix = static_cast<std::int16_t>(bits_per_voxel(dt));
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.vox_offset = static_cast<float>(kDataOffset);
  h.sizeof_hdr = 348;
  h.magic = {'n', '+', '1', '\0'};
  h.source_endian = Endian::Little;
  if (!like) h.xyzt_units = 2;  // millimetres
  return h;
}

}  // namespace

VoxelGrid to_voxel_grid(const Image& image) {
  const Dims d = spatial_dims(image.header);
  return VoxelGrid(d, spatial_spacing(image.header), image.data);
}

LabelVolume to_label_volume(const Image& image) {
  const Dims d = spatial_dims(image.header);
  std::vector<std::uint8_t> labels(image.data.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = image.data[i];
    if (!(v >= 0.0 && v <= 4.0) || v != std::floor(v)) {
      fail(Errc::InvalidLabel, "segmentation value " + std::to_string(v) + " is not a label in {0..4}");
    }
    labels[i] = static_cast<std::uint8_t>(v);
  }
  return LabelVolume(d, spatial_spacing(image.header), std::move(labels));
}

Image from_voxel_grid(const VoxelGrid& grid, Datatype dt, const Header* like) {
  Image img;
  img.header = header_for(grid.dims(), grid.spacing(), dt, like);
  img.data.assign(grid.data().begin(), grid.data().end());
  if (dt == Datatype::Float32) {
    for (double& v : img.data) v = static_cast<double>(static_cast<float>(v));
  }
  return img;
}

Image from_label_volume(const LabelVolume& labels, const Header* like) {
  Image img;
  img.header = header_for(labels.dims(), labels.spacing(), Datatype::UInt8, like);
  img.data.assign(labels.data().begin(), labels.data().end());
  return img;
}

}  // namespace pedseg::nifti
