#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dragdrop/core/grid.hpp"

namespace dragdrop::io {

enum class VolumeFormat { nifti1, frame_dir, raw_json };

VolumeFormat parse_format(const std::string& name);
const char* to_string(VolumeFormat f);

/// Directory -> frame_dir; *.nii / *.nii.gz -> nifti1; *.json / *.f32 -> raw_json.
VolumeFormat detect_format(const std::string& path);

Volume load_volume(const std::string& path, VolumeFormat format);
Volume load_volume(const std::string& path);
void save_volume(const Volume& vol, const std::string& path, VolumeFormat format);
void save_volume(const Volume& vol, const std::string& path);

/// Labels must be non-negative integers; float sources must hold integral values.
LabelVolume load_label(const std::string& path, VolumeFormat format);
LabelVolume load_label(const std::string& path);
void save_label(const LabelVolume& label, const std::string& path, VolumeFormat format);
void save_label(const LabelVolume& label, const std::string& path);

/// NIfTI-1 single-file (.nii) images, optionally gzip-compressed.
/// Volumes are written as float32, labels as int32. Oblique affines are rejected on read.
std::vector<std::uint8_t> encode_nifti(const Volume& vol, bool gzip);
std::vector<std::uint8_t> encode_nifti(const LabelVolume& label, bool gzip);
Volume decode_nifti_volume(const std::vector<std::uint8_t>& bytes, const std::string& origin);
LabelVolume decode_nifti_label(const std::vector<std::uint8_t>& bytes, const std::string& origin);

/// raw_json pair: `<stem>.f32` little-endian float32, x-fastest, plus `<stem>.json`
/// with {"dims":[3], "spacing":[3], "order":"x-fastest"}. `path` may name either file or the stem.
std::string raw_json_stem(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::string& path, const std::string& text);

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& bytes);
/// Inflates gzip or zlib streams; returns input unchanged when it is not compressed.
std::vector<std::uint8_t> maybe_gunzip(const std::vector<std::uint8_t>& bytes, const std::string& origin);

}  // namespace dragdrop::io
