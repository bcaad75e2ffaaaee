#pragma once

// Little-endian binary formats shared with external feature exporters.
//
//   FeatureFile     "DFM1" u32 H, u32 W, u32 C, H*W*C binary32
//   BankFile        "EBK1" u32 D, u32 C, D x (u16 len, name, u8 kind), D*C binary32
//   AnnotationFile  "ANN1" u32 N, N x (u8 kind, u32 gt, geometry)
//                   geometry: box = 4 x binary32 (x0 y0 x1 y1)
//                             mask = u32 count, count x (u32 location, binary32 weight)
//   Checkpoint      "HED1" u32 C, u32 flags (bit 0: hidden block), u64 P, P binary64
//
// Decoders report the byte offset of the first problem they find.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "regionalign/evalkit.hpp"
#include "regionalign/featmap.hpp"
#include "regionalign/retrieval.hpp"
#include "regionalign/student.hpp"

namespace regionalign::io {

using Bytes = std::vector<std::uint8_t>;

Bytes encode_features(const FeatureMap& map);
FeatureMap decode_features(std::span<const std::uint8_t> bytes);

Bytes encode_bank(const EmbeddingBank& bank);
EmbeddingBank decode_bank(std::span<const std::uint8_t> bytes);

/// EvalRecord::image is not stored; decoded records have image = 0.
Bytes encode_annotations(std::span<const EvalRecord> records);
std::vector<EvalRecord> decode_annotations(std::span<const std::uint8_t> bytes);

Bytes encode_head(const StudentHead& head);
StudentHead decode_head(std::span<const std::uint8_t> bytes);

/// Whole-file helpers. File system failures throw ErrorCode::kIo; content
/// errors keep their decoder code with the file name prefixed.
Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

FeatureMap read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMap& map);
EmbeddingBank read_bank(const std::filesystem::path& path);
void write_bank(const std::filesystem::path& path, const EmbeddingBank& bank);
std::vector<EvalRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, std::span<const EvalRecord> records);
StudentHead read_head(const std::filesystem::path& path);
void write_head(const std::filesystem::path& path, const StudentHead& head);

}  // namespace regionalign::io
