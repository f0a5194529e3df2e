#pragma once

#include <optional>
#include <utility>

#include "atnf/tensor.hpp"

namespace atnf {

enum class SplitKind { Train, Test };

/// A loaded dataset: images as [3,S,S] float tensors with values in [0,1].
struct Dataset {
    std::vector<Tensor<float>> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    SplitKind split = SplitKind::Train;

    size_t size() const { return images.size(); }
    int64_t image_size() const { return images.empty() ? 0 : images[0].dim(1); }
};

/// Loads a class-per-directory image tree: root/<class>/<file>.{png,jpg,jpeg}.
/// Class index = lexicographic (byte-order) rank of the directory name.
/// Grayscale images are replicated to 3 channels; everything is resized to
/// image_size x image_size with bilinear interpolation and scaled to [0,1].
Dataset load_image_dataset(const std::string& root, int64_t image_size,
                           const std::optional<std::vector<std::string>>& expected_classes = {});

/// Raw container (.atnd): magic ATND, version u32, class names, then
/// label + CHW dims + f32 pixels per sample. Little-endian throughout.
void save_raw_dataset(const Dataset& ds, const std::string& path);
Dataset load_raw_dataset(const std::string& path);

/// Counter-clockwise rotation by 90*times degrees of a square [C,H,W] image.
Tensor<float> rotate90(const Tensor<float>& img, int times);

/// Mirror across the vertical axis (column reversal).
Tensor<float> hflip(const Tensor<float>& img);

enum class AugmentMode { None, Dihedral8, RandomRotFlip };

struct AugmentPolicy {
    AugmentMode mode = AugmentMode::None;
    SplitKind applies_to = SplitKind::Train;
};

/// Dihedral8 expands every sample into its 8 rotation/flip variants.
/// RandomRotFlip appends, per sample, one hflip of a randomly 1-3 times
/// rotated copy. Datasets whose split the policy does not cover pass
/// through unchanged.
Dataset augment(const Dataset& ds, const AugmentPolicy& policy, uint64_t seed);

/// Synthetic 4-class task exercising both attention flavors: the class is
/// (blob quadrant: top-left vs bottom-right) x (blob's dominant color
/// channel: red vs green). A smooth random red-green background field makes
/// the color cue unreadable without localizing the blob first. Returns a
/// stratified 80/20 train/test split.
std::pair<Dataset, Dataset> gen_synthetic(int64_t n_per_class, int64_t size, uint64_t seed);

/// Epoch shuffling: a seed- and epoch-derived permutation chunked into
/// batches, final partial batch included.
std::vector<std::vector<size_t>> batch_indices(size_t n, int64_t batch_size, uint64_t seed,
                                               int64_t epoch);

/// Gathers dataset samples into a [N,3,S,S] batch plus its labels.
std::pair<Tensor<float>, std::vector<int>> make_batch(const Dataset& ds,
                                                      const std::vector<size_t>& indices);

// 8-bit interleaved image buffer used by the codec layer.
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    std::vector<uint8_t> pixels;
};

ImageU8 decode_image_file(const std::string& path);
void encode_png(const std::string& path, const ImageU8& img);
void encode_jpeg(const std::string& path, const ImageU8& img, int quality = 95);

}  // namespace atnf
