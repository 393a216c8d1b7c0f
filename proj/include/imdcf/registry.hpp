#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "imdcf/family_ensemble.hpp"

namespace imdcf {

inline constexpr int kRegistryFormatVersion = 1;

// On-disk model registry: one JSON document holding the encoding table, every
// family ensemble (matrices as arrays of rows), thresholds, manifests, and the
// training configuration. Doubles are written in shortest round-trip form, so
// a reloaded registry scores bit-identically.
struct RegistryFile {
    int format_version = kRegistryFormatVersion;
    ModelRegistry registry;
    std::string created_at;

    friend bool operator==(const RegistryFile&, const RegistryFile&) = default;
};

std::string serialize_registry(const RegistryFile& file);

// Throws RegistryError for malformed documents, unsupported versions, or
// parameters that fail validation (rows must be stochastic within 1e-9).
RegistryFile parse_registry(std::string_view text);

void save_registry(const RegistryFile& file, const std::filesystem::path& path);  // IoError
RegistryFile load_registry(const std::filesystem::path& path);  // IoError, RegistryError

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace imdcf
