#pragma once

#include <string>

namespace mer {

/// A point on Russel's circumplex model of affect. Valence is the
/// pleasantness axis, arousal the activation axis; both live in [-1, 1].
struct EmotionPoint {
    double valence = 0.0;
    double arousal = 0.0;

    bool operator==(const EmotionPoint&) const = default;
};

/// Sign-based region of the circumplex. Exact zeros are boundary cases:
/// both coordinates zero -> Origin, exactly one zero -> Axis.
enum class QuadrantLabel {
    HighArousalPositiveValence,
    HighArousalNegativeValence,
    LowArousalNegativeValence,
    LowArousalPositiveValence,
    Origin,
    Axis,
};

std::string to_string(QuadrantLabel q);

/// Construct an EmotionPoint, saturating each coordinate into [-1, 1].
/// Throws InvalidValue on non-finite input.
EmotionPoint clamp(double valence, double arousal);

QuadrantLabel quadrant(const EmotionPoint& p);

/// Euclidean norm of the point; range [0, sqrt(2)]. Not normalized.
double intensity(const EmotionPoint& p);

/// Euclidean distance between two points.
double distance(const EmotionPoint& a, const EmotionPoint& b);

}  // namespace mer
