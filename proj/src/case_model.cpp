#include "rpsim/case_model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "rpsim/error.hpp"

namespace rpsim {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryLabels = {
    "Misinformation or Misconceptions",
    "Emotional Discomfort or Fear",
    "Communication Barriers",
    "Financial or Insurance-Related Concern",
};

const std::set<std::string, std::less<>> kSelfManagementKeys = {"awareness", "adherence", "communication",
                                                                "regimen_execution"};

// Strict object reader: every key must be consumed or declared optional,
// anything left over is a schema violation.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw SchemaError(where_ + ": expected an object");
    }

    const json& required(const std::string& key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) throw SchemaError(where_ + ": missing required field '" + key + "'");
        seen_.insert(key);
        return *it;
    }

    const json* optional(const std::string& key) {
        auto it = obj_.find(key);
        seen_.insert(key);
        if (it == obj_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    std::string string(const std::string& key) {
        const auto& v = required(key);
        if (!v.is_string()) throw SchemaError(where_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.contains(it.key())) throw SchemaError(where_ + ": unknown field '" + it.key() + "'");
        }
    }

    const std::string& where() const { return where_; }

private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

Demographics read_demographics(const json& j) {
    ObjectReader r(j, "demographics");
    Demographics d;
    d.name = r.string("name");
    const auto& age = r.required("age");
    if (!age.is_number_integer() || age.get<int>() < 0) throw SchemaError("demographics.age: expected a non-negative integer");
    d.age = age.get<int>();
    d.sex = r.string("sex");
    d.marital_status = r.string("marital_status");
    d.education = r.string("education");
    d.background = r.string("background");
    r.finish();
    return d;
}

ClinicalBlock read_clinical(const json& j) {
    ObjectReader r(j, "clinical");
    ClinicalBlock c;
    c.admission_reason = r.string("admission_reason");
    c.adherence_behavior = r.string("adherence_behavior");
    c.medical_surgical_history = r.string("medical_surgical_history");
    r.finish();
    return c;
}

PsychosocialBlock read_psychosocial(const json& j) {
    ObjectReader r(j, "psychosocial");
    PsychosocialBlock p;
    p.personality = r.string("personality");
    p.life_situation = r.string("life_situation");
    p.family_history = r.string("family_history");
    p.lifestyle = r.string("lifestyle");
    p.family_dynamics = r.string("family_dynamics");
    r.finish();
    return p;
}

HiddenConcern read_concern(const json& j, std::size_t index) {
    ObjectReader r(j, "hidden_concerns[" + std::to_string(index) + "]");
    HiddenConcern c;
    c.id = r.string("id");
    if (c.id.empty()) throw SchemaError(r.where() + ".id: must be non-empty");
    c.content = r.string("content");
    if (c.content.empty()) throw SchemaError(r.where() + ".content: must be non-empty");
    const auto& cat = r.required("category");
    if (!cat.is_string()) throw SchemaError(r.where() + ".category: expected a string");
    c.category = parse_category(cat.get<std::string>());
    const auto& conf = r.required("confidence");
    if (!conf.is_number()) throw SchemaError(r.where() + ".confidence: expected a number");
    c.confidence = conf.get<double>();
    if (!(c.confidence >= 0.0 && c.confidence <= 1.0)) throw SchemaError(r.where() + ".confidence: outside [0,1]");
    if (const auto* ev = r.optional("evidence_snippets")) {
        if (!ev->is_array()) throw SchemaError(r.where() + ".evidence_snippets: expected an array");
        for (const auto& s : *ev) {
            if (!s.is_string()) throw SchemaError(r.where() + ".evidence_snippets: expected strings");
            c.evidence_snippets.push_back(s.get<std::string>());
        }
    }
    if (const auto* cl = r.optional("cluster_id")) {
        if (!cl->is_number_integer() || cl->get<long long>() < 0)
            throw SchemaError(r.where() + ".cluster_id: expected a non-negative integer");
        c.cluster_id = cl->get<std::size_t>();
    } else {
        c.cluster_id = static_cast<std::size_t>(c.category);
    }
    r.finish();
    return c;
}

InterventionSpec read_intervention(const json& j) {
    ObjectReader r(j, "intervention");
    InterventionSpec s;
    s.primary_concern_id = r.string("primary_concern_id");
    s.initial_preference = r.string("initial_preference");
    s.target_plan = r.string("target_plan");
    r.finish();
    return s;
}

RoleplaySpec read_roleplay(const json& j) {
    ObjectReader r(j, "roleplay");
    RoleplaySpec s;
    s.response_style = r.string("response_style");
    s.disclosure_behavior = r.string("disclosure_behavior");
    r.finish();
    return s;
}

json demographics_json(const Demographics& d) {
    return {{"name", d.name},         {"age", d.age},
            {"sex", d.sex},           {"marital_status", d.marital_status},
            {"education", d.education}, {"background", d.background}};
}

json clinical_json(const ClinicalBlock& c) {
    return {{"admission_reason", c.admission_reason},
            {"adherence_behavior", c.adherence_behavior},
            {"medical_surgical_history", c.medical_surgical_history}};
}

}  // namespace

std::string_view category_label(ConcernCategory c) { return kCategoryLabels.at(static_cast<std::size_t>(c)); }

ConcernCategory parse_category(std::string_view label) {
    for (std::size_t i = 0; i < kCategoryLabels.size(); ++i) {
        if (kCategoryLabels[i] == label) return kAllCategories[i];
    }
    throw CategoryError("unknown concern category '" + std::string(label) + "'");
}

std::string_view task_name(TaskKind t) { return t == TaskKind::Confirmation ? "confirmation" : "intervention"; }

TaskKind parse_task(std::string_view name) {
    if (name == "confirmation") return TaskKind::Confirmation;
    if (name == "intervention") return TaskKind::Intervention;
    throw SchemaError("unknown task '" + std::string(name) + "'");
}

std::optional<std::size_t> PatientProfile::concern_index(std::string_view id) const {
    for (std::size_t i = 0; i < hidden_concerns.size(); ++i) {
        if (hidden_concerns[i].id == id) return i;
    }
    return std::nullopt;
}

std::size_t PatientProfile::primary_concern_index() const {
    if (!intervention) throw MissingIntervention("case '" + case_id + "' has no intervention block");
    auto idx = concern_index(intervention->primary_concern_id);
    if (!idx) throw ReferenceError("primary_concern_id '" + intervention->primary_concern_id + "' is dangling");
    return *idx;
}

PatientProfile profile_from_json(const json& doc) {
    ObjectReader r(doc, "case");
    PatientProfile p;
    p.case_id = r.string("case_id");
    if (p.case_id.empty()) throw SchemaError("case.case_id: must be non-empty");
    p.demographics = read_demographics(r.required("demographics"));
    p.clinical = read_clinical(r.required("clinical"));
    p.psychosocial = read_psychosocial(r.required("psychosocial"));

    const auto& concerns = r.required("hidden_concerns");
    if (!concerns.is_array()) throw SchemaError("case.hidden_concerns: expected an array");
    if (concerns.empty()) throw SchemaError("case.hidden_concerns: at least one concern is required");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < concerns.size(); ++i) {
        auto c = read_concern(concerns[i], i);
        if (!ids.insert(c.id).second) throw SchemaError("case.hidden_concerns: duplicate id '" + c.id + "'");
        p.hidden_concerns.push_back(std::move(c));
    }

    if (const auto* iv = r.optional("intervention")) {
        p.intervention = read_intervention(*iv);
        if (!p.concern_index(p.intervention->primary_concern_id)) {
            throw ReferenceError("intervention.primary_concern_id '" + p.intervention->primary_concern_id +
                                 "' does not name a hidden concern");
        }
    }
    p.roleplay = read_roleplay(r.required("roleplay"));

    const auto& domains = r.required("self_management_domains");
    if (!domains.is_object()) throw SchemaError("case.self_management_domains: expected an object");
    for (auto it = domains.begin(); it != domains.end(); ++it) {
        if (!kSelfManagementKeys.contains(it.key()))
            throw SchemaError("self_management_domains: unknown field '" + it.key() + "'");
        if (!it->is_string()) throw SchemaError("self_management_domains." + it.key() + ": expected a string");
        p.self_management_domains.emplace(it.key(), it->get<std::string>());
    }
    r.finish();
    return p;
}

PatientProfile load_profile(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("case document is not valid JSON: ") + e.what());
    }
    return profile_from_json(doc);
}

PatientProfile load_profile_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open case file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_profile(buf.str());
}

json profile_to_json(const PatientProfile& p) {
    json concerns = json::array();
    for (const auto& c : p.hidden_concerns) {
        concerns.push_back({{"id", c.id},
                            {"content", c.content},
                            {"category", category_label(c.category)},
                            {"confidence", c.confidence},
                            {"evidence_snippets", c.evidence_snippets},
                            {"cluster_id", c.cluster_id}});
    }
    json doc = {
        {"case_id", p.case_id},
        {"demographics", demographics_json(p.demographics)},
        {"clinical", clinical_json(p.clinical)},
        {"psychosocial",
         {{"personality", p.psychosocial.personality},
          {"life_situation", p.psychosocial.life_situation},
          {"family_history", p.psychosocial.family_history},
          {"lifestyle", p.psychosocial.lifestyle},
          {"family_dynamics", p.psychosocial.family_dynamics}}},
        {"hidden_concerns", concerns},
        {"roleplay",
         {{"response_style", p.roleplay.response_style}, {"disclosure_behavior", p.roleplay.disclosure_behavior}}},
        {"self_management_domains", p.self_management_domains},
    };
    if (p.intervention) {
        doc["intervention"] = {{"primary_concern_id", p.intervention->primary_concern_id},
                               {"initial_preference", p.intervention->initial_preference},
                               {"target_plan", p.intervention->target_plan}};
    }
    return doc;
}

ClinicianView project_clinician_view(const PatientProfile& profile, TaskKind task) {
    ClinicianView v;
    v.case_id = profile.case_id;
    v.task = task;
    v.demographics = profile.demographics;
    v.clinical = profile.clinical;
    if (task == TaskKind::Intervention) {
        if (!profile.intervention)
            throw MissingIntervention("case '" + profile.case_id + "' has no intervention block");
        v.initial_preference = profile.intervention->initial_preference;
        v.target_plan = profile.intervention->target_plan;
    }
    return v;
}

json view_to_json(const ClinicianView& v) {
    json j = {{"case_id", v.case_id},
              {"task", task_name(v.task)},
              {"demographics", demographics_json(v.demographics)},
              {"clinical", clinical_json(v.clinical)}};
    if (v.initial_preference) j["initial_preference"] = *v.initial_preference;
    if (v.target_plan) j["target_plan"] = *v.target_plan;
    return j;
}

}  // namespace rpsim
