#include "atnf/plan.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "atnf/arch_config.hpp"
#include "atnf/common.hpp"

namespace atnf {

const char* family_name(Family f) {
    switch (f) {
        case Family::VggMini: return "vgg_mini";
        case Family::ResNetMini: return "resnet_mini";
        case Family::InceptionMini: return "inception_mini";
        case Family::DenseNetMini: return "densenet_mini";
        case Family::EfficientNetMini: return "efficientnet_mini";
    }
    return "?";
}

std::optional<Family> family_from_name(const std::string& name) {
    for (Family f : {Family::VggMini, Family::ResNetMini, Family::InceptionMini,
                     Family::DenseNetMini, Family::EfficientNetMini})
        if (name == family_name(f)) return f;
    return std::nullopt;
}

const char* scale_name(Scale s) { return s == Scale::Toy ? "toy" : "paper"; }

std::optional<Scale> scale_from_name(const std::string& name) {
    if (name == "toy") return Scale::Toy;
    if (name == "paper") return Scale::Paper;
    return std::nullopt;
}

std::string PlanParseError::str() const {
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
}

namespace {

struct Token {
    std::string text;
    int column;  // 1-based
};

// Splits one source line on whitespace; '=' is always its own token.
std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < line.size()) {
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        if (line[i] == '=') {
            out.push_back({"=", static_cast<int>(i) + 1});
            ++i;
            continue;
        }
        size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) &&
               line[i] != '=')
            ++i;
        out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
    }
    return out;
}

PlanParseError err(PlanErrorKind kind, int line, int column, std::string message) {
    return PlanParseError{line, column, std::move(message), kind};
}

std::optional<int64_t> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    int64_t v = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        v = v * 10 + (c - '0');
        if (v > (int64_t{1} << 40)) return std::nullopt;
    }
    return v;
}

}  // namespace

PlanResult parse_plan(const std::string& text) {
    PlacementPlan plan;
    bool have_family = false;
    std::unordered_set<std::string> seen;

    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (size_t hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        std::vector<Token> toks = tokenize(line);
        if (toks.empty()) continue;

        if (!have_family) {
            if (toks[0].text != "family")
                return err(PlanErrorKind::Syntax, line_no, toks[0].column,
                           "expected 'family = <name>' as the first statement");
            if (toks.size() < 3 || toks[1].text != "=")
                return err(PlanErrorKind::Syntax, line_no, toks[0].column,
                           "malformed family line, expected 'family = <name>'");
            if (toks.size() > 3)
                return err(PlanErrorKind::Syntax, line_no, toks[3].column,
                           "unexpected text after family name");
            auto fam = family_from_name(toks[2].text);
            if (!fam)
                return err(PlanErrorKind::BadValue, line_no, toks[2].column,
                           "unknown family '" + toks[2].text + "'");
            plan.family = *fam;
            have_family = true;
            continue;
        }

        if (toks[0].text == "family")
            return err(PlanErrorKind::Syntax, line_no, toks[0].column, "duplicate family line");
        if (toks[0].text != "attach")
            return err(PlanErrorKind::Syntax, line_no, toks[0].column,
                       "expected 'attach <SE|SA> at <hook>'");
        if (toks.size() < 2)
            return err(PlanErrorKind::Syntax, line_no, toks[0].column,
                       "attach needs a module kind (SE or SA)");
        AttentionKind kind;
        if (toks[1].text == "SE")
            kind = AttentionKind::SE;
        else if (toks[1].text == "SA")
            kind = AttentionKind::SA;
        else
            return err(PlanErrorKind::BadValue, line_no, toks[1].column,
                       "unknown attention kind '" + toks[1].text + "' (expected SE or SA)");
        if (toks.size() < 3 || toks[2].text != "at")
            return err(PlanErrorKind::Syntax, line_no, toks[std::min<size_t>(2, toks.size() - 1)].column,
                       "expected 'at <hook>'");
        if (toks.size() < 4)
            return err(PlanErrorKind::Syntax, line_no, toks[2].column, "missing hook name");

        Insertion ins;
        ins.kind = kind;
        ins.hook = toks[3].text;

        if (toks.size() > 4) {
            if (toks[4].text != "with")
                return err(PlanErrorKind::Syntax, line_no, toks[4].column,
                           "unexpected text after hook name (expected 'with')");
            if (toks.size() != 8 || toks[6].text != "=")
                return err(PlanErrorKind::Syntax, line_no, toks[4].column,
                           "malformed with-clause, expected 'with r=<int>' or 'with k=<int>'");
            const std::string& key = toks[5].text;
            const char* expected = kind == AttentionKind::SE ? "r" : "k";
            if (key != expected)
                return err(PlanErrorKind::UnknownKey, line_no, toks[5].column,
                           "unknown key '" + key + "' for " +
                               (kind == AttentionKind::SE ? "SE" : "SA") + " (expected '" +
                               expected + "')");
            auto value = parse_int(toks[7].text);
            if (!value || *value < 1)
                return err(PlanErrorKind::BadValue, line_no, toks[7].column,
                           "'" + toks[7].text + "' is not a positive integer");
            if (kind == AttentionKind::SE) {
                ins.reduction = *value;
            } else {
                if (*value % 2 == 0)
                    return err(PlanErrorKind::BadValue, line_no, toks[7].column,
                               "SA kernel size must be odd");
                ins.kernel = *value;
            }
        }

        std::string dup_key = ins.hook + (kind == AttentionKind::SE ? "\x01SE" : "\x01SA");
        if (!seen.insert(dup_key).second)
            return err(PlanErrorKind::DuplicateInsertion, line_no, toks[3].column,
                       "duplicate " + std::string(kind == AttentionKind::SE ? "SE" : "SA") +
                           " insertion at hook '" + ins.hook + "'");
        plan.insertions.push_back(std::move(ins));
    }

    if (!have_family)
        return err(PlanErrorKind::Syntax, 1, 1, "missing 'family = <name>' line");
    return plan;
}

PlacementPlan parse_plan_or_throw(const std::string& text) {
    PlanResult res = parse_plan(text);
    if (auto* e = std::get_if<PlanParseError>(&res)) throw UsageError("plan parse: " + e->str());
    return std::get<PlacementPlan>(res);
}

std::string serialize_plan(const PlacementPlan& plan) {
    std::string out = "family = ";
    out += family_name(plan.family);
    out += "\n";
    for (const Insertion& ins : plan.insertions) {
        out += "attach ";
        out += ins.kind == AttentionKind::SE ? "SE" : "SA";
        out += " at ";
        out += ins.hook;
        if (ins.kind == AttentionKind::SE)
            out += " with r=" + std::to_string(ins.reduction);
        else
            out += " with k=" + std::to_string(ins.kernel);
        out += "\n";
    }
    return out;
}

std::optional<PlanParseError> validate_plan(
    PlacementPlan& plan, const std::vector<std::pair<std::string, int64_t>>& hooks) {
    std::unordered_map<std::string, int64_t> position;
    for (const auto& [name, pos] : hooks) position[name] = pos;

    std::unordered_set<std::string> seen_position_kind;
    for (const Insertion& ins : plan.insertions) {
        auto it = position.find(ins.hook);
        if (it == position.end())
            return PlanParseError{0, 0, "unknown hook '" + ins.hook + "'",
                                  PlanErrorKind::UnknownHook};
        // aliases resolve to one position: duplicates are positional
        std::string key = std::to_string(it->second) +
                          (ins.kind == AttentionKind::SE ? "\x01SE" : "\x01SA");
        if (!seen_position_kind.insert(key).second)
            return PlanParseError{0, 0,
                                  "duplicate " +
                                      std::string(ins.kind == AttentionKind::SE ? "SE" : "SA") +
                                      " insertion at hook '" + ins.hook + "'",
                                  PlanErrorKind::DuplicateInsertion};
    }
    std::stable_sort(plan.insertions.begin(), plan.insertions.end(),
                     [&](const Insertion& a, const Insertion& b) {
                         return position[a.hook] < position[b.hook];
                     });
    return std::nullopt;
}

namespace {

Insertion se_at(std::string hook) {
    Insertion i;
    i.kind = AttentionKind::SE;
    i.hook = std::move(hook);
    return i;
}

Insertion sa_at(std::string hook) {
    Insertion i;
    i.kind = AttentionKind::SA;
    i.hook = std::move(hook);
    return i;
}

}  // namespace

std::map<std::string, PlacementPlan> canonical_plans(Family family, Scale scale) {
    PlacementPlan baseline, v1, v2, v3;
    baseline.family = v1.family = v2.family = v3.family = family;

    switch (family) {
        case Family::VggMini: {
            arch::VggCfg cfg = arch::vgg_cfg(scale);
            for (size_t b = 1; b <= cfg.channels.size(); ++b)
                for (int j = 1; j <= cfg.convs_per_block[b - 1]; ++j)
                    v1.insertions.push_back(
                        se_at("b" + std::to_string(b) + ".conv" + std::to_string(j)));
            for (int b : {3, 4, 5}) v2.insertions.push_back(se_at("b" + std::to_string(b) + ".last"));
            for (int b : {1, 2}) v3.insertions.push_back(sa_at("b" + std::to_string(b) + ".last"));
            for (int b : {3, 4, 5}) v3.insertions.push_back(se_at("b" + std::to_string(b) + ".last"));
            break;
        }
        case Family::ResNetMini: {
            arch::ResNetCfg cfg = arch::resnet_cfg(scale);
            for (size_t l = 1; l <= cfg.channels.size(); ++l)
                for (int b = 1; b <= cfg.blocks_per_layer; ++b)
                    v1.insertions.push_back(se_at("layer" + std::to_string(l) + ".block" +
                                                  std::to_string(b) + ".inner"));
            for (int l : {2, 3, 4}) v2.insertions.push_back(se_at("layer" + std::to_string(l) + ".end"));
            // SE first, then SA, sequentially at each tapped layer end
            for (int l : {2, 3, 4}) {
                v3.insertions.push_back(se_at("layer" + std::to_string(l) + ".end"));
                v3.insertions.push_back(sa_at("layer" + std::to_string(l) + ".end"));
            }
            break;
        }
        case Family::InceptionMini: {
            for (char m : {'A', 'B', 'C', 'D', 'E'})
                v1.insertions.push_back(se_at(std::string("incep") + m + ".end"));
            for (char m : {'C', 'D', 'E'})
                v2.insertions.push_back(se_at(std::string("incep") + m + ".end"));
            v3.insertions.push_back(sa_at("incepB.end"));
            for (char m : {'C', 'D', 'E'})
                v3.insertions.push_back(se_at(std::string("incep") + m + ".end"));
            v3.insertions.push_back(sa_at("pre_gap"));
            break;
        }
        case Family::DenseNetMini: {
            for (int b : {1, 2, 3, 4}) v1.insertions.push_back(se_at("dense" + std::to_string(b) + ".end"));
            for (int b : {2, 3, 4}) v2.insertions.push_back(se_at("dense" + std::to_string(b) + ".end"));
            for (int b : {2, 3, 4}) {
                v3.insertions.push_back(sa_at("trans" + std::to_string(b - 1) + ".end"));
                v3.insertions.push_back(se_at("dense" + std::to_string(b) + ".end"));
            }
            v3.insertions.push_back(sa_at("pre_gap"));
            break;
        }
        case Family::EfficientNetMini: {
            arch::EfficientNetCfg cfg = arch::efficientnet_cfg(scale);
            for (size_t s = 1; s <= cfg.stage_channels.size(); ++s)
                for (int b = 1; b <= cfg.blocks_per_stage[s - 1]; ++b)
                    v1.insertions.push_back(se_at("stage" + std::to_string(s) + ".mbconv" +
                                                  std::to_string(b) + ".post_dw"));
            for (int s : {2, 3, 4}) v2.insertions.push_back(se_at("stage" + std::to_string(s) + ".end"));
            v3.insertions.push_back(se_at("stage2.end"));
            v3.insertions.push_back(se_at("stage3.end"));
            v3.insertions.push_back(sa_at("stage3.end"));  // right after SE3
            v3.insertions.push_back(se_at("stage4.end"));
            break;
        }
    }

    return {{"baseline", std::move(baseline)},
            {"v1_global_se", std::move(v1)},
            {"v2_selective_se", std::move(v2)},
            {"v3_hybrid", std::move(v3)}};
}

}  // namespace atnf
