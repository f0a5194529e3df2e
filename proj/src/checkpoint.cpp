#include "atnf/checkpoint.hpp"

#include <algorithm>

#include "atnf/binio.hpp"

namespace atnf {

namespace {

constexpr uint32_t kCheckpointVersion = 1;
const std::string kLabelComment = "# name: ";

}  // namespace

std::vector<uint8_t> serialize_checkpoint(ModelGraph<float>& model) {
    io::Writer w;
    w.bytes("ATNF", 4);
    w.u32(kCheckpointVersion);
    w.str(family_name(model.family));
    w.str(scale_name(model.scale));
    w.u32(static_cast<uint32_t>(model.num_classes));
    w.u64(model.seed);
    // the plan label rides along as a comment line of the plan text
    w.str(kLabelComment + model.plan_label + "\n" + model.plan_text);

    auto entries = model.state_entries();
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    for (const auto& e : entries) {
        w.str(e.name);
        const Shape& s = e.tensor->shape();
        w.u32(static_cast<uint32_t>(s.size()));
        for (int64_t d : s) w.u64(static_cast<uint64_t>(d));
        w.f32_span(e.tensor->values());
    }
    return w.take();
}

ModelGraph<float> deserialize_checkpoint(std::span<const uint8_t> bytes) {
    io::Reader r(bytes, "checkpoint");
    char magic[4];
    r.raw(magic, 4);
    if (std::string(magic, 4) != "ATNF") throw IoError("checkpoint: bad magic");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));

    const std::string family_str = r.str();
    const std::string scale_str = r.str();
    const int64_t num_classes = r.u32();
    const uint64_t seed = r.u64();
    std::string plan_text = r.str();

    auto family = family_from_name(family_str);
    auto scale = scale_from_name(scale_str);
    if (!family) throw IoError("checkpoint: unknown family '" + family_str + "'");
    if (!scale) throw IoError("checkpoint: unknown scale '" + scale_str + "'");

    std::string label = "checkpoint";
    if (plan_text.rfind(kLabelComment, 0) == 0) {
        const size_t nl = plan_text.find('\n');
        label = plan_text.substr(kLabelComment.size(),
                                 nl == std::string::npos ? std::string::npos
                                                         : nl - kLabelComment.size());
    }
    PlacementPlan plan = parse_plan_or_throw(plan_text);

    ModelGraph<float> model = build_model<float>(*family, *scale, num_classes, seed, plan, label);

    std::vector<ModelGraph<float>::NamedTensor> entries = model.state_entries();
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    size_t next = 0;
    while (!r.at_end()) {
        const std::string name = r.str();
        const uint32_t ndim = r.u32();
        Shape shape(ndim);
        for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int64_t>(r.u64());
        if (next >= entries.size() || entries[next].name != name)
            throw IoError("checkpoint: unexpected tensor '" + name + "'");
        Tensor<float>* t = entries[next].tensor;
        if (t->shape() != shape)
            throw IoError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                          " but the model expects " + shape_str(t->shape()));
        r.f32_into(t->values());
        ++next;
    }
    if (next != entries.size())
        throw IoError("checkpoint: missing tensors (got " + std::to_string(next) + " of " +
                      std::to_string(entries.size()) + ")");
    return model;
}

void write_checkpoint(ModelGraph<float>& model, const std::string& path) {
    io::write_file(path, serialize_checkpoint(model));
}

ModelGraph<float> load_checkpoint(const std::string& path) {
    std::vector<uint8_t> bytes = io::read_file(path);
    return deserialize_checkpoint(bytes);
}

}  // namespace atnf
