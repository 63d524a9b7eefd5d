#include "bsca/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "bsca/preprocess.hpp"

namespace bsca {

namespace {

constexpr const char* kHeader = "volume_path,slice_index,label";

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

bool is_relative(const std::string& path) { return path.empty() || path[0] != '/'; }

}  // namespace

char class_to_char(int label) {
  if (label < 0 || label >= kNumClasses) {
    throw DataError("class index " + std::to_string(label) + " out of range");
  }
  return static_cast<char>('A' + label);
}

int class_from_string(const std::string& text) {
  if (text.size() == 1 && text[0] >= 'A' && text[0] < 'A' + kNumClasses) {
    return text[0] - 'A';
  }
  throw DataError("unknown class label \"" + text + "\" (expected A, B, C or D)");
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);

  std::string line;
  if (!std::getline(is, line) || strip_cr(line) != kHeader) {
    throw DataError(path + ": manifest header must be \"" + kHeader + "\"");
  }

  Manifest manifest;
  std::set<std::pair<std::string, int>> seen;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    }
    ManifestRow row;
    row.volume_path = fields[0];
    if (row.volume_path.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty volume path");
    }
    const auto& idx = fields[1];
    const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), row.slice_index);
    if (ec != std::errc{} || ptr != idx.data() + idx.size() || row.slice_index < 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad slice index \"" + idx + "\"");
    }
    row.label = class_from_string(fields[2]);
    if (!seen.emplace(row.volume_path, row.slice_index).second) {
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate sample " +
                      row.volume_path + "#" + idx);
    }
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open manifest for writing: " + path);
  os << kHeader << '\n';
  for (const auto& row : manifest.rows) {
    os << row.volume_path << ',' << row.slice_index << ',' << class_to_char(row.label) << '\n';
  }
  os.flush();
  if (!os) throw DataError("failed writing manifest: " + path);
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Dataset load_dataset(const Manifest& manifest, const std::string& base_dir, int image_size) {
  Dataset ds;
  ds.image_size = image_size;
  ds.samples.reserve(manifest.rows.size());

  std::map<std::string, Volume> volumes;  // one read per file
  for (const auto& row : manifest.rows) {
    std::string full = row.volume_path;
    if (is_relative(full) && !base_dir.empty()) full = base_dir + "/" + full;
    auto it = volumes.find(full);
    if (it == volumes.end()) {
      it = volumes.emplace(full, load_nifti(full)).first;
    }
    const Volume& vol = it->second;
    if (row.slice_index >= vol.slice_count()) {
      throw DataError(row.volume_path + ": slice index " + std::to_string(row.slice_index) +
                      " out of range, volume has " + std::to_string(vol.slice_count()) +
                      " slices");
    }
    SliceSample sample;
    sample.source_id = row.volume_path;
    sample.slice_index = row.slice_index;
    sample.label = row.label;
    sample.image = preprocess_slice(vol, row.slice_index, image_size);
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

Tensor make_batch(const Dataset& ds, const std::vector<int>& sample_indices) {
  if (sample_indices.empty()) throw DataError("make_batch: empty sample list");
  const int s = ds.image_size;
  Tensor batch({static_cast<int>(sample_indices.size()), 3, s, s});
  const std::int64_t stride = static_cast<std::int64_t>(3) * s * s;
  for (std::size_t i = 0; i < sample_indices.size(); ++i) {
    const auto& img = ds.samples[static_cast<std::size_t>(sample_indices[i])].image;
    if (img.numel() != stride) {
      throw ShapeError("make_batch: sample image has " + std::to_string(img.numel()) +
                       " values, expected " + std::to_string(stride));
    }
    std::copy(img.data(), img.data() + stride, batch.data() + static_cast<std::int64_t>(i) * stride);
  }
  return batch;
}

}  // namespace bsca
