#pragma once

#include <random>

#include "ttnet/geometry.hpp"
#include "ttnet/targets.hpp"

namespace ttnet {

/// One draw per 9-frame sequence. The geometric part is the composite map
/// crop -> resize back to full size -> rotate about the centre -> optional flip.
struct AugmentationParams {
    double crop_x = 0.0;     ///< fraction of the width removed, [0, 0.15]
    double crop_y = 0.0;     ///< fraction of the height removed, [0, 0.15]
    double crop_left = 0.5;  ///< share of the removed width taken from the left, [0, 1]
    double crop_top = 0.5;
    double rotation_deg = 0.0;  ///< [-15, 15]
    bool hflip = false;
    double brightness = 0.0;  ///< additive, as a fraction of 255
    double contrast = 0.0;    ///< gain - 1 around mid-grey
    double hue = 0.0;         ///< rotation of the chroma plane, radians

    void validate() const;
    bool is_identity() const;
    bool is_geometric_identity() const;
};

struct AugmentationRanges {
    double max_crop = 0.15;
    double max_rotation_deg = 15.0;
    double hflip_probability = 0.5;
    double brightness = 0.1;
    double contrast = 0.1;
    double hue = 0.05;
};

AugmentationParams sample_augmentation(const AugmentationRanges& ranges, std::mt19937_64& rng);

/// Maps a full-frame point through the geometric transform of a w x h frame.
PointF augment_point(const AugmentationParams& p, PointF src, int width, int height);

/// Applies the transform to every frame (bilinear), the masks (nearest) and the
/// ball; photometric changes touch frames only. A ball mapped outside the frame
/// becomes absent. Identity parameters return the sample unchanged.
TrainingSample augment(const TrainingSample& sample, const AugmentationParams& params);

}  // namespace ttnet
