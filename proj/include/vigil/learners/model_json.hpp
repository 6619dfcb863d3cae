#pragma once

#include <json.hpp>

#include "vigil/learners/gbt.hpp"
#include "vigil/learners/iforest.hpp"
#include "vigil/learners/lof.hpp"
#include "vigil/learners/ocsvm.hpp"

// ADL serializers so model types embed directly in larger JSON documents
// (model files, calibration bundles). Tree nodes are compact 5-tuples.

namespace vigil::learners {

void to_json(nlohmann::json& j, const OcsvmModel& m);
void from_json(const nlohmann::json& j, OcsvmModel& m);

void to_json(nlohmann::json& j, const IsoForestModel::Tree& t);
void from_json(const nlohmann::json& j, IsoForestModel::Tree& t);
void to_json(nlohmann::json& j, const IsoForestModel& m);
void from_json(const nlohmann::json& j, IsoForestModel& m);

void to_json(nlohmann::json& j, const LofModel& m);
void from_json(const nlohmann::json& j, LofModel& m);

void to_json(nlohmann::json& j, const GbtConfig& c);
void from_json(const nlohmann::json& j, GbtConfig& c);
void to_json(nlohmann::json& j, const GbtModel::Tree& t);
void from_json(const nlohmann::json& j, GbtModel::Tree& t);
void to_json(nlohmann::json& j, const GbtModel& m);
void from_json(const nlohmann::json& j, GbtModel& m);

} // namespace vigil::learners
