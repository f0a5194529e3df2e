#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace atnf {

enum class Family { VggMini, ResNetMini, InceptionMini, DenseNetMini, EfficientNetMini };
enum class Scale { Toy, Paper };
enum class AttentionKind { SE, SA };

const char* family_name(Family f);
std::optional<Family> family_from_name(const std::string& name);
const char* scale_name(Scale s);
std::optional<Scale> scale_from_name(const std::string& name);

/// One `attach` line: which module goes where, with its hyperparameter
/// (SE: reduction ratio r, default 16; SA: kernel size k, default 7).
struct Insertion {
    std::string hook;
    AttentionKind kind = AttentionKind::SE;
    int64_t reduction = 16;
    int64_t kernel = 7;

    bool operator==(const Insertion&) const = default;
};

struct PlacementPlan {
    Family family = Family::VggMini;
    std::vector<Insertion> insertions;

    bool operator==(const PlacementPlan&) const = default;
};

enum class PlanErrorKind { Syntax, UnknownKey, UnknownHook, DuplicateInsertion, BadValue };

struct PlanParseError {
    int line = 0;    // 1-based
    int column = 0;  // 1-based
    std::string message;
    PlanErrorKind kind = PlanErrorKind::Syntax;

    std::string str() const;
};

using PlanResult = std::variant<PlacementPlan, PlanParseError>;

/// Parses the line-oriented plan grammar:
///
///   family = <identifier>                          (required first)
///   attach <SE|SA> at <hook> [with r=<int>|k=<int>]
///
/// `#` starts a comment; hook existence is checked by validate_plan, not
/// here. The first error wins.
PlanResult parse_plan(const std::string& text);

/// Throwing convenience wrapper around parse_plan.
PlacementPlan parse_plan_or_throw(const std::string& text);

/// Emits the family line followed by one attach line per insertion, in the
/// plan's stored order, always with an explicit `with r=.../k=...` clause.
std::string serialize_plan(const PlacementPlan& plan);

/// Checks every insertion against a (name -> position) hook table and
/// normalizes insertion order to hook position order (stable within a hook).
std::optional<PlanParseError> validate_plan(
    PlacementPlan& plan, const std::vector<std::pair<std::string, int64_t>>& hooks);

/// The named experiment plans for one backbone family, keyed
/// baseline / v1_global_se / v2_selective_se / v3_hybrid.
/// v1 enumerates per-conv hooks, so its contents depend on scale.
std::map<std::string, PlacementPlan> canonical_plans(Family family, Scale scale = Scale::Toy);

}  // namespace atnf
