#include "atnf/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "atnf/binio.hpp"
#include "atnf/rng.hpp"

namespace fs = std::filesystem;

namespace atnf {

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Bilinear resize of an interleaved 8-bit image into a [3,S,S] float tensor
/// scaled to [0,1]; single-channel inputs are replicated across RGB.
Tensor<float> to_tensor_resized(const ImageU8& img, int64_t size) {
    Tensor<float> out({3, size, size});
    const double sx = static_cast<double>(img.width) / static_cast<double>(size);
    const double sy = static_cast<double>(img.height) / static_cast<double>(size);
    for (int64_t y = 0; y < size; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int64_t y0 = static_cast<int64_t>(fy);
        const int64_t y1 = std::min<int64_t>(y0 + 1, img.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (int64_t x = 0; x < size; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int64_t x0 = static_cast<int64_t>(fx);
            const int64_t x1 = std::min<int64_t>(x0 + 1, img.width - 1);
            const double wx = fx - static_cast<double>(x0);
            for (int64_t c = 0; c < 3; ++c) {
                const int64_t sc = img.channels == 1 ? 0 : c;
                auto px = [&](int64_t yy, int64_t xx) {
                    return static_cast<double>(
                        img.pixels[static_cast<size_t>((yy * img.width + xx) * img.channels + sc)]);
                };
                const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                                 wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
                out.at(0, c, y, x) = static_cast<float>(v / 255.0);
            }
        }
    }
    return out;
}

}  // namespace

Dataset load_image_dataset(const std::string& root, int64_t image_size,
                           const std::optional<std::vector<std::string>>& expected_classes) {
    if (image_size < 1) throw UsageError("load_image_dataset: image_size must be positive");
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);

    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    std::sort(classes.begin(), classes.end());  // byte order fixes class indices
    if (classes.empty()) throw IoError("no class directories under " + root);
    if (expected_classes && classes != *expected_classes) {
        std::string msg = "class directories under " + root + " {";
        for (const auto& c : classes) msg += c + ",";
        msg += "} do not match the expected class list";
        throw IoError(msg);
    }

    Dataset ds;
    ds.class_names = classes;
    for (size_t ci = 0; ci < classes.size(); ++ci) {
        const fs::path cdir = fs::path(root) / classes[ci];
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(cdir))
            if (entry.is_regular_file() && is_image_file(entry.path()))
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("class directory has no images: " + cdir.string());
        for (const std::string& f : files) {
            ds.images.push_back(to_tensor_resized(decode_image_file(f), image_size));
            ds.labels.push_back(static_cast<int>(ci));
        }
    }
    return ds;
}

void save_raw_dataset(const Dataset& ds, const std::string& path) {
    io::Writer w;
    w.bytes("ATND", 4);
    w.u32(1);
    w.u32(static_cast<uint32_t>(ds.class_names.size()));
    for (const auto& name : ds.class_names) w.str(name);
    w.u64(ds.images.size());
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const Tensor<float>& img = ds.images[i];
        w.u32(static_cast<uint32_t>(ds.labels[i]));
        w.u32(static_cast<uint32_t>(img.dim(0)));
        w.u32(static_cast<uint32_t>(img.dim(1)));
        w.u32(static_cast<uint32_t>(img.dim(2)));
        w.f32_span(img.values());
    }
    io::write_file(path, w.data());
}

Dataset load_raw_dataset(const std::string& path) {
    std::vector<uint8_t> bytes = io::read_file(path);
    io::Reader r(bytes, path);
    char magic[4];
    r.raw(magic, 4);
    if (std::string(magic, 4) != "ATND") throw IoError(path + ": bad magic, not a raw dataset");
    const uint32_t version = r.u32();
    if (version != 1) throw IoError(path + ": unsupported raw dataset version " +
                                    std::to_string(version));
    Dataset ds;
    const uint32_t num_classes = r.u32();
    for (uint32_t i = 0; i < num_classes; ++i) ds.class_names.push_back(r.str());
    const uint64_t count = r.u64();
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t label = r.u32();
        if (label >= num_classes)
            throw IoError(path + ": sample " + std::to_string(i) + " has label " +
                          std::to_string(label) + " >= class count");
        const int64_t c = r.u32(), h = r.u32(), w = r.u32();
        Tensor<float> img({c, h, w});
        r.f32_into(img.values());
        if (!ds.images.empty() && img.shape() != ds.images.front().shape())
            throw IoError(path + ": samples disagree on image shape");
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(label));
    }
    if (!r.at_end()) throw IoError(path + ": trailing bytes after declared sample count");
    return ds;
}

Tensor<float> rotate90(const Tensor<float>& img, int times) {
    if (img.ndim() != 3) throw ShapeError("rotate90 expects a [C,H,W] image");
    if (img.dim(1) != img.dim(2)) throw ShapeError("rotate90 requires a square image");
    if (times < 1 || times > 3) throw UsageError("rotate90: times must be 1..3");
    const int64_t c = img.dim(0), s = img.dim(1);
    Tensor<float> cur = img;
    for (int t = 0; t < times; ++t) {
        Tensor<float> next({c, s, s});
        // counter-clockwise: out[r][col] = in[col][S-1-r]
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t r = 0; r < s; ++r)
                for (int64_t col = 0; col < s; ++col)
                    next.at(0, ch, r, col) = cur.at(0, ch, col, s - 1 - r);
        cur = next;
    }
    return cur;
}

Tensor<float> hflip(const Tensor<float>& img) {
    if (img.ndim() != 3) throw ShapeError("hflip expects a [C,H,W] image");
    const int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor<float> out({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t r = 0; r < h; ++r)
            for (int64_t col = 0; col < w; ++col)
                out.at(0, ch, r, col) = img.at(0, ch, r, w - 1 - col);
    return out;
}

Dataset augment(const Dataset& ds, const AugmentPolicy& policy, uint64_t seed) {
    if (policy.mode == AugmentMode::None || ds.split != policy.applies_to) return ds;

    Dataset out;
    out.class_names = ds.class_names;
    out.split = ds.split;
    if (policy.mode == AugmentMode::Dihedral8) {
        out.images.reserve(ds.images.size() * 8);
        out.labels.reserve(ds.labels.size() * 8);
        for (size_t i = 0; i < ds.images.size(); ++i) {
            for (int rot = 0; rot < 4; ++rot) {
                Tensor<float> base = rot == 0 ? ds.images[i].clone() : rotate90(ds.images[i], rot);
                out.images.push_back(base);
                out.images.push_back(hflip(base));
                out.labels.push_back(ds.labels[i]);
                out.labels.push_back(ds.labels[i]);
            }
        }
    } else {  // RandomRotFlip: one extra flipped-rotated copy per sample
        Rng rng = Rng::derive(seed, 0xA06E47ull);
        out.images.reserve(ds.images.size() * 2);
        out.labels.reserve(ds.labels.size() * 2);
        for (size_t i = 0; i < ds.images.size(); ++i) {
            const int times = 1 + static_cast<int>(rng.uniform_int(3));
            out.images.push_back(ds.images[i].clone());
            out.labels.push_back(ds.labels[i]);
            out.images.push_back(hflip(rotate90(ds.images[i], times)));
            out.labels.push_back(ds.labels[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

/// Separable Gaussian blur, reflecting at the borders.
void gaussian_blur(std::vector<double>& field, int64_t s, double sigma) {
    const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(2.5 * sigma)));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int64_t i = -radius; i <= radius; ++i) {
        kernel[static_cast<size_t>(i + radius)] =
            std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        norm += kernel[static_cast<size_t>(i + radius)];
    }
    for (double& k : kernel) k /= norm;

    auto reflect = [s](int64_t i) {
        if (i < 0) i = -i - 1;
        if (i >= s) i = 2 * s - 1 - i;
        return i;
    };
    std::vector<double> tmp(field.size());
    for (int64_t y = 0; y < s; ++y)
        for (int64_t x = 0; x < s; ++x) {
            double acc = 0.0;
            for (int64_t i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<size_t>(i + radius)] *
                       field[static_cast<size_t>(y * s + reflect(x + i))];
            tmp[static_cast<size_t>(y * s + x)] = acc;
        }
    for (int64_t y = 0; y < s; ++y)
        for (int64_t x = 0; x < s; ++x) {
            double acc = 0.0;
            for (int64_t i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<size_t>(i + radius)] *
                       field[static_cast<size_t>(reflect(y + i) * s + x)];
            field[static_cast<size_t>(y * s + x)] = acc;
        }
}

Tensor<float> synth_sample(int64_t s, bool bottom_right, bool green, Rng& rng) {
    // Red-green confound field at exactly the blob's spatial scale, so no
    // fixed linear filter can separate blob color from background color;
    // reading the color cue requires finding the (brightness-defined) blob.
    const double sigma = static_cast<double>(s) / 10.0;
    // Blurring white noise with sigma/sqrt(2) gives the field the same power
    // spectrum shape as the blob profile itself, so no fixed linear filter
    // gets a cleaner look at the blob's color than at the background. The
    // random DC offset blinds global and per-region color sums as well.
    std::vector<double> field(static_cast<size_t>(s * s));
    for (double& v : field) v = rng.normal();
    gaussian_blur(field, s, sigma / std::sqrt(2.0));
    double mean = 0.0, var = 0.0;
    for (double v : field) mean += v;
    mean /= static_cast<double>(field.size());
    for (double v : field) var += (v - mean) * (v - mean);
    var /= static_cast<double>(field.size());
    const double inv_std = var > 0 ? 1.0 / std::sqrt(var) : 0.0;
    const double field_amp = 0.22;
    const double field_dc = 0.05 * rng.normal();

    // true blob: jittered across its quadrant (one blur-length margin)
    const double lo = static_cast<double>(s) / 10.0,
                 hi = static_cast<double>(s) / 2.0 - static_cast<double>(s) / 10.0;
    double cy = rng.uniform(lo, hi), cx = rng.uniform(lo, hi);
    if (bottom_right) {
        cy += static_cast<double>(s) / 2.0;
        cx += static_cast<double>(s) / 2.0;
    }

    const double kDom = 0.58, kOther = 0.22, kBlue = 0.25;
    const double sigma_blob = sigma * rng.uniform(0.8, 1.3);

    Tensor<float> img({3, s, s});
    for (int64_t y = 0; y < s; ++y)
        for (int64_t x = 0; x < s; ++x) {
            const double f =
                (field[static_cast<size_t>(y * s + x)] - mean) * inv_std * field_amp + field_dc;
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double g =
                std::exp(-0.5 * (dy * dy + dx * dx) / (sigma_blob * sigma_blob));
            double r = 0.38 + f + (green ? kOther : kDom) * g + 0.1 * rng.normal();
            double gr = 0.38 - f + (green ? kDom : kOther) * g + 0.1 * rng.normal();
            double b = 0.38 + kBlue * g + 0.1 * rng.normal();
            img.at(0, 0, y, x) = static_cast<float>(std::clamp(r, 0.0, 1.0));
            img.at(0, 1, y, x) = static_cast<float>(std::clamp(gr, 0.0, 1.0));
            img.at(0, 2, y, x) = static_cast<float>(std::clamp(b, 0.0, 1.0));
        }
    return img;
}

}  // namespace

std::pair<Dataset, Dataset> gen_synthetic(int64_t n_per_class, int64_t size, uint64_t seed) {
    if (size < 16) throw UsageError("gen_synthetic: size must be at least 16");
    if (n_per_class < 1) throw UsageError("gen_synthetic: n_per_class must be positive");

    const std::vector<std::string> names = {"tl_red", "tl_green", "br_red", "br_green"};
    Dataset train, test;
    train.class_names = test.class_names = names;
    train.split = SplitKind::Train;
    test.split = SplitKind::Test;

    const int64_t n_train = n_per_class * 4 / 5;
    Rng rng = Rng::derive(seed, 0x5E17F00Dull);
    for (int cls = 0; cls < 4; ++cls) {
        const bool bottom_right = cls >= 2;
        const bool green = (cls % 2) == 1;
        for (int64_t i = 0; i < n_per_class; ++i) {
            Tensor<float> img = synth_sample(size, bottom_right, green, rng);
            Dataset& target = i < n_train ? train : test;
            target.images.push_back(std::move(img));
            target.labels.push_back(cls);
        }
    }
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<size_t>> batch_indices(size_t n, int64_t batch_size, uint64_t seed,
                                               int64_t epoch) {
    if (batch_size < 1) throw UsageError("batch_indices: batch_size must be positive");
    Rng rng = Rng::derive(seed, 0xBA7C4000ull + static_cast<uint64_t>(epoch));
    std::vector<size_t> perm = rng.permutation(n);
    std::vector<std::vector<size_t>> batches;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(n, start + static_cast<size_t>(batch_size));
        batches.emplace_back(perm.begin() + static_cast<int64_t>(start),
                             perm.begin() + static_cast<int64_t>(end));
    }
    return batches;
}

std::pair<Tensor<float>, std::vector<int>> make_batch(const Dataset& ds,
                                                      const std::vector<size_t>& indices) {
    if (indices.empty()) throw UsageError("make_batch: empty index list");
    const int64_t s = ds.image_size();
    Tensor<float> batch({static_cast<int64_t>(indices.size()), 3, s, s});
    std::vector<int> labels;
    labels.reserve(indices.size());
    float* out = batch.data();
    const int64_t stride = 3 * s * s;
    for (size_t i = 0; i < indices.size(); ++i) {
        const Tensor<float>& img = ds.images[indices[i]];
        std::copy(img.data(), img.data() + stride, out + static_cast<int64_t>(i) * stride);
        labels.push_back(ds.labels[indices[i]]);
    }
    return {std::move(batch), std::move(labels)};
}

}  // namespace atnf
