#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rpsim {

using nlohmann::json;

// The four-label taxonomy. The ordinal doubles as the default concern cluster.
enum class ConcernCategory : int {
    MisinformationOrMisconceptions = 0,
    EmotionalDiscomfortOrFear = 1,
    CommunicationBarriers = 2,
    FinancialOrInsuranceConcern = 3,
};

inline constexpr std::size_t kCategoryCount = 4;
inline constexpr std::array<ConcernCategory, kCategoryCount> kAllCategories = {
    ConcernCategory::MisinformationOrMisconceptions,
    ConcernCategory::EmotionalDiscomfortOrFear,
    ConcernCategory::CommunicationBarriers,
    ConcernCategory::FinancialOrInsuranceConcern,
};

/// Display label used in case files, findings and the UI dropdown.
std::string_view category_label(ConcernCategory c);
/// Exact label match; throws CategoryError for anything else.
ConcernCategory parse_category(std::string_view label);

enum class TaskKind { Confirmation, Intervention };

std::string_view task_name(TaskKind t);
TaskKind parse_task(std::string_view name);

struct HiddenConcern {
    std::string id;
    std::string content;
    ConcernCategory category = ConcernCategory::MisinformationOrMisconceptions;
    double confidence = 1.0;
    std::vector<std::string> evidence_snippets;
    std::size_t cluster_id = 0;
};

struct Demographics {
    std::string name;
    int age = 0;
    std::string sex;
    std::string marital_status;
    std::string education;
    std::string background;
};

struct ClinicalBlock {
    std::string admission_reason;
    std::string adherence_behavior;
    std::string medical_surgical_history;
};

struct PsychosocialBlock {
    std::string personality;
    std::string life_situation;
    std::string family_history;
    std::string lifestyle;
    std::string family_dynamics;
};

struct InterventionSpec {
    std::string primary_concern_id;
    std::string initial_preference;
    std::string target_plan;
};

struct RoleplaySpec {
    std::string response_style;
    std::string disclosure_behavior;
};

struct PatientProfile {
    std::string case_id;
    Demographics demographics;
    ClinicalBlock clinical;
    PsychosocialBlock psychosocial;
    std::vector<HiddenConcern> hidden_concerns;
    std::optional<InterventionSpec> intervention;
    RoleplaySpec roleplay;
    // Stored verbatim; no effect on the dynamics.
    std::map<std::string, std::string> self_management_domains;

    std::size_t concern_count() const { return hidden_concerns.size(); }
    /// Index of the concern with the given id, if any.
    std::optional<std::size_t> concern_index(std::string_view id) const;
    /// Index of c*; throws MissingIntervention when the profile has no intervention block.
    std::size_t primary_concern_index() const;
};

/// The chart-level projection shown to clinicians. Whitelisted fields only.
struct ClinicianView {
    std::string case_id;
    TaskKind task = TaskKind::Confirmation;
    Demographics demographics;
    ClinicalBlock clinical;
    std::optional<std::string> initial_preference;
    std::optional<std::string> target_plan;
};

/// Parses and validates a case document. Throws SchemaError, CategoryError or ReferenceError.
PatientProfile load_profile(std::string_view document);
PatientProfile profile_from_json(const json& doc);
PatientProfile load_profile_file(const std::string& path);
json profile_to_json(const PatientProfile& profile);

/// Throws MissingIntervention when `task` is Intervention and the profile has no spec.
ClinicianView project_clinician_view(const PatientProfile& profile, TaskKind task);
json view_to_json(const ClinicianView& view);

}  // namespace rpsim
