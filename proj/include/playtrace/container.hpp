#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "playtrace/bytes.hpp"
#include "playtrace/dataset.hpp"
#include "playtrace/evaluation.hpp"

namespace playtrace {

inline constexpr std::uint32_t kContainerVersion = 1;

/// On-disk model: "PTMC", u32 version, then tagged sections (u32 tag,
/// u64 length, payload) KIND, META, PREP, MODL in that order.
struct ModelContainer {
  ModelKind kind = ModelKind::Knn;
  /// JSON text kept verbatim so a load/save cycle reproduces the bytes.
  std::string meta;
  TrainedModel model;

  nlohmann::json meta_json() const;
};

std::string encode(const ModelContainer& container);
/// Throws Format on damage and UnknownVersion on a version this build does not read.
ModelContainer decode(std::string_view bytes);

void save_container(const std::string& path, const ModelContainer& container);
ModelContainer load_container(const std::string& path);

void write_preprocessor(ByteWriter& out, const Preprocessor& prep);
Preprocessor read_preprocessor(ByteReader& in);

}  // namespace playtrace
