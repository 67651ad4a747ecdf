#pragma once

#include <string>

#include "viblstm/classifier.hpp"

namespace viblstm {

/// Container layout: magic "VIBL", u32 LE version, u64 LE manifest length,
/// UTF-8 JSON manifest, then every tensor as IEEE-754 32-bit little-endian
/// values at the byte offsets the manifest declares. The manifest lists
/// tensors in payload order with non-overlapping offsets.
inline constexpr char kModelMagic[4] = {'V', 'I', 'B', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Serialize the model. Values are stored at 32-bit precision; saving a model
/// that came out of load_model reproduces the file byte for byte.
void save_model(const SequenceClassifier& m, const std::string& path);

/// Parse and validate a container. Throws FormatError (with the byte offset
/// of the fault) on bad magic, bad version, or truncation; never returns a
/// partially filled model.
SequenceClassifier load_model(const std::string& path);

}  // namespace viblstm
