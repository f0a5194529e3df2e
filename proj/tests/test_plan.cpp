#include <doctest.h>

#include "atnf/model.hpp"
#include "atnf/plan.hpp"

using namespace atnf;

TEST_SUITE_BEGIN("plan");

namespace {

PlacementPlan parse_ok(const std::string& text) {
    PlanResult res = parse_plan(text);
    if (auto* err = std::get_if<PlanParseError>(&res)) FAIL("parse failed: " << err->str());
    return std::get<PlacementPlan>(res);
}

PlanParseError parse_err(const std::string& text) {
    PlanResult res = parse_plan(text);
    REQUIRE(std::holds_alternative<PlanParseError>(res));
    return std::get<PlanParseError>(res);
}

}  // namespace

TEST_CASE("a family line alone is a baseline plan") {
    PlacementPlan p = parse_ok("family = vgg_mini\n");
    CHECK(p.family == Family::VggMini);
    CHECK(p.insertions.empty());
}

TEST_CASE("attach with an explicit reduction ratio") {
    PlacementPlan p = parse_ok("family = vgg_mini\nattach SE at b3.last with r=16\n");
    REQUIRE(p.insertions.size() == 1);
    CHECK(p.insertions[0].kind == AttentionKind::SE);
    CHECK(p.insertions[0].hook == "b3.last");
    CHECK(p.insertions[0].reduction == 16);
}

TEST_CASE("defaults: r=16 for SE, k=7 for SA") {
    PlacementPlan p =
        parse_ok("family = resnet_mini\nattach SE at layer2.end\nattach SA at layer3.end\n");
    CHECK(p.insertions[0].reduction == 16);
    CHECK(p.insertions[1].kernel == 7);
}

TEST_CASE("comments and blank lines are ignored") {
    PlacementPlan p = parse_ok(
        "# experiment 3\n\nfamily = vgg_mini  # the family\n"
        "attach SE at b4.last with r=8  # deeper block\n");
    REQUIRE(p.insertions.size() == 1);
    CHECK(p.insertions[0].reduction == 8);
}

TEST_CASE("missing family line is a syntax error at the offending line") {
    PlanParseError e = parse_err("attach SE at b3.last\n");
    CHECK(e.kind == PlanErrorKind::Syntax);
    CHECK(e.line == 1);

    PlanParseError empty = parse_err("");
    CHECK(empty.kind == PlanErrorKind::Syntax);
    CHECK(empty.line == 1);
    CHECK(empty.column == 1);
}

TEST_CASE("unknown keys are hard errors") {
    PlanParseError e = parse_err("family = vgg_mini\nattach SE at b3.last with k=7\n");
    CHECK(e.kind == PlanErrorKind::UnknownKey);
    CHECK(e.line == 2);

    PlanParseError e2 = parse_err("family = vgg_mini\nattach SA at b1.last with r=16\n");
    CHECK(e2.kind == PlanErrorKind::UnknownKey);
}

TEST_CASE("bad values") {
    CHECK(parse_err("family = vgg_mini\nattach SE at b3.last with r=zero\n").kind ==
          PlanErrorKind::BadValue);
    CHECK(parse_err("family = vgg_mini\nattach SE at b3.last with r=0\n").kind ==
          PlanErrorKind::BadValue);
    CHECK(parse_err("family = vgg_mini\nattach SA at b1.last with k=4\n").kind ==
          PlanErrorKind::BadValue);
    CHECK(parse_err("family = vgg_máni\n").kind == PlanErrorKind::BadValue);
    CHECK(parse_err("family = vgg_mini\nattach XX at b3.last\n").kind ==
          PlanErrorKind::BadValue);
}

TEST_CASE("duplicate (hook, kind) pairs are rejected at parse time") {
    PlanParseError e =
        parse_err("family = vgg_mini\nattach SE at b3.last\nattach SE at b3.last with r=8\n");
    CHECK(e.kind == PlanErrorKind::DuplicateInsertion);
    CHECK(e.line == 3);

    // SE and SA at the same hook is legal
    PlacementPlan ok =
        parse_ok("family = resnet_mini\nattach SE at layer2.end\nattach SA at layer2.end\n");
    CHECK(ok.insertions.size() == 2);
}

TEST_CASE("trailing garbage is a syntax error") {
    CHECK(parse_err("family = vgg_mini extra\n").kind == PlanErrorKind::Syntax);
    CHECK(parse_err("family = vgg_mini\nattach SE at b3.last nonsense\n").kind ==
          PlanErrorKind::Syntax);
    CHECK(parse_err("family = vgg_mini\nfamily = vgg_mini\n").kind == PlanErrorKind::Syntax);
}

TEST_CASE("validate_plan checks hooks and normalizes order") {
    ModelGraph<float> m = build_backbone<float>(Family::VggMini, Scale::Toy, 4, 0);
    PlacementPlan p = parse_ok(
        "family = vgg_mini\nattach SE at b5.last\nattach SE at b3.last\nattach SA at b1.last\n");
    CHECK(!validate_plan(p, m).has_value());
    CHECK(p.insertions[0].hook == "b1.last");
    CHECK(p.insertions[1].hook == "b3.last");
    CHECK(p.insertions[2].hook == "b5.last");

    PlacementPlan bad = parse_ok("family = vgg_mini\nattach SE at b6.last\n");
    auto err = validate_plan(bad, m);
    REQUIRE(err.has_value());
    CHECK(err->kind == PlanErrorKind::UnknownHook);
}

TEST_CASE("serialize-parse round trip is the identity for every canonical plan") {
    for (Family fam : {Family::VggMini, Family::ResNetMini, Family::InceptionMini,
                       Family::DenseNetMini, Family::EfficientNetMini})
        for (Scale scale : {Scale::Toy, Scale::Paper})
            for (const auto& [name, plan] : canonical_plans(fam, scale)) {
                std::string text = serialize_plan(plan);
                PlacementPlan again = parse_ok(text);
                INFO(family_name(fam) << " " << name);
                CHECK(again == plan);
                CHECK(serialize_plan(again) == text);
            }
}

TEST_CASE("round trip holds for randomly generated plans") {
    Rng rng(1);
    for (int it = 0; it < 50; ++it) {
        Family fam = static_cast<Family>(rng.uniform_int(5));
        ModelGraph<float> m = build_backbone<float>(fam, Scale::Toy, 4, 0);
        PlacementPlan plan;
        plan.family = fam;
        const auto& hooks = m.hooks;
        for (const HookPoint& h : hooks) {
            const uint64_t roll = rng.uniform_int(6);
            if (roll == 0 || roll == 2) {
                Insertion ins;
                ins.kind = AttentionKind::SE;
                ins.hook = h.name;
                ins.reduction = 1 + static_cast<int64_t>(rng.uniform_int(20));
                plan.insertions.push_back(ins);
            }
            if (roll == 1 || roll == 2) {
                Insertion ins;
                ins.kind = AttentionKind::SA;
                ins.hook = h.name;
                ins.kernel = 1 + 2 * static_cast<int64_t>(rng.uniform_int(4));
                plan.insertions.push_back(ins);
            }
        }
        PlacementPlan again = parse_ok(serialize_plan(plan));
        CHECK(again == plan);
    }
}

TEST_CASE("canonical plan contents match the published placements") {
    auto vgg = canonical_plans(Family::VggMini, Scale::Toy);
    CHECK(vgg.at("baseline").insertions.empty());
    CHECK(vgg.at("v1_global_se").insertions.size() == 10);  // 2 convs x 5 blocks
    CHECK(vgg.at("v2_selective_se").insertions.size() == 3);
    CHECK(vgg.at("v3_hybrid").insertions.size() == 5);  // 2 SA + 3 SE

    auto vgg_paper = canonical_plans(Family::VggMini, Scale::Paper);
    CHECK(vgg_paper.at("v1_global_se").insertions.size() == 13);

    auto count = [](const PlacementPlan& p, AttentionKind k) {
        int n = 0;
        for (const auto& ins : p.insertions) n += ins.kind == k;
        return n;
    };

    auto res = canonical_plans(Family::ResNetMini, Scale::Toy);
    CHECK(res.at("v1_global_se").insertions.size() == 8);
    CHECK(count(res.at("v3_hybrid"), AttentionKind::SE) == 3);
    CHECK(count(res.at("v3_hybrid"), AttentionKind::SA) == 3);
    // SE precedes SA at each tapped hook
    CHECK(res.at("v3_hybrid").insertions[0].kind == AttentionKind::SE);
    CHECK(res.at("v3_hybrid").insertions[1].kind == AttentionKind::SA);
    CHECK(res.at("v3_hybrid").insertions[0].hook == res.at("v3_hybrid").insertions[1].hook);

    auto incep = canonical_plans(Family::InceptionMini, Scale::Toy);
    CHECK(incep.at("v1_global_se").insertions.size() == 5);
    CHECK(count(incep.at("v3_hybrid"), AttentionKind::SE) == 3);
    CHECK(count(incep.at("v3_hybrid"), AttentionKind::SA) == 2);

    auto dense = canonical_plans(Family::DenseNetMini, Scale::Toy);
    CHECK(dense.at("v1_global_se").insertions.size() == 4);
    CHECK(count(dense.at("v3_hybrid"), AttentionKind::SE) == 3);
    CHECK(count(dense.at("v3_hybrid"), AttentionKind::SA) == 4);

    auto eff = canonical_plans(Family::EfficientNetMini, Scale::Toy);
    CHECK(eff.at("v1_global_se").insertions.size() == 9);
    CHECK(count(eff.at("v3_hybrid"), AttentionKind::SE) == 3);
    CHECK(count(eff.at("v3_hybrid"), AttentionKind::SA) == 1);
    // the SA rides right after SE3 at stage3.end
    CHECK(eff.at("v3_hybrid").insertions[2].kind == AttentionKind::SA);
    CHECK(eff.at("v3_hybrid").insertions[2].hook == "stage3.end");
}

TEST_CASE("every canonical plan validates at both scales") {
    for (Family fam : {Family::VggMini, Family::ResNetMini, Family::InceptionMini,
                       Family::DenseNetMini, Family::EfficientNetMini})
        for (Scale scale : {Scale::Toy, Scale::Paper}) {
            ModelGraph<float> m = build_backbone<float>(fam, scale, 4, 0);
            for (auto& [name, plan] : canonical_plans(fam, scale)) {
                PlacementPlan copy = plan;
                INFO(family_name(fam) << " " << scale_name(scale) << " " << name);
                CHECK(!validate_plan(copy, m).has_value());
            }
        }
}

TEST_SUITE_END();
