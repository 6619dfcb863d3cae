#pragma once

#include <filesystem>

#include "vigil/learners/gbt.hpp"
#include "vigil/learners/iforest.hpp"
#include "vigil/learners/lof.hpp"
#include "vigil/learners/ocsvm.hpp"

namespace vigil::learners {

// Versioned JSON persistence. Every file carries {"v": 1, "kind": ...};
// loading rejects unknown versions and kind mismatches (ModelFormatError).
// Doubles are stored with shortest round-trip formatting, so
// load(save(m)) == m bit-exactly.

void save_ocsvm(const OcsvmModel& m, const std::filesystem::path& path);
OcsvmModel load_ocsvm(const std::filesystem::path& path);

void save_iforest(const IsoForestModel& m, const std::filesystem::path& path);
IsoForestModel load_iforest(const std::filesystem::path& path);

void save_lof(const LofModel& m, const std::filesystem::path& path);
LofModel load_lof(const std::filesystem::path& path);

void save_gbt(const GbtModel& m, const std::filesystem::path& path);
GbtModel load_gbt(const std::filesystem::path& path);

bool operator==(const OcsvmModel& a, const OcsvmModel& b);
bool operator==(const IsoForestModel::Node& a, const IsoForestModel::Node& b);
bool operator==(const IsoForestModel::Tree& a, const IsoForestModel::Tree& b);
bool operator==(const IsoForestModel& a, const IsoForestModel& b);
bool operator==(const LofModel& a, const LofModel& b);
bool operator==(const GbtModel::Node& a, const GbtModel::Node& b);
bool operator==(const GbtModel::Tree& a, const GbtModel::Tree& b);
bool operator==(const GbtConfig& a, const GbtConfig& b);
bool operator==(const GbtModel& a, const GbtModel& b);

} // namespace vigil::learners
