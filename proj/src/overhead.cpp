#include "atnf/overhead.hpp"

#include <unordered_map>

namespace atnf {

template <typename T>
OverheadReport attention_overhead(const ModelGraph<T>& model, const PlacementPlan& plan,
                                  const Shape& input_shape) {
    PlacementPlan p = plan;
    if (auto err = validate_plan(p, model))
        throw UsageError("attention_overhead: plan does not validate: " + err->message);

    std::unordered_map<std::string, const HookPoint*> hook_by_name;
    for (const auto& h : model.hooks) hook_by_name[h.name] = &h;
    std::vector<Shape> shapes = model.probe_shapes(input_shape);

    OverheadReport report;
    for (const Insertion& ins : p.insertions) {
        const HookPoint* hook = hook_by_name[ins.hook];
        const Shape& s = shapes[static_cast<size_t>(hook->position)];
        const int64_t n = s[0], c = s[1], h = s[2], w = s[3];
        OverheadEntry e;
        e.hook = ins.hook;
        e.kind = ins.kind;
        if (ins.kind == AttentionKind::SE) {
            const int64_t hidden = std::max<int64_t>(1, c / ins.reduction);
            e.params_added = se_param_count(c, ins.reduction);
            e.flops_added = n * (2 * c * h * w + 2 * c * hidden);
        } else {
            const int64_t k = ins.kernel;
            e.params_added = sa_param_count(k);
            e.flops_added = n * (2 * c * h * w + 2 * k * k * h * w + c * h * w);
        }
        report.params_added += e.params_added;
        report.flops_added += e.flops_added;
        report.breakdown.push_back(std::move(e));
    }
    return report;
}

template OverheadReport attention_overhead<float>(const ModelGraph<float>&, const PlacementPlan&,
                                                  const Shape&);
template OverheadReport attention_overhead<double>(const ModelGraph<double>&,
                                                   const PlacementPlan&, const Shape&);

}  // namespace atnf
