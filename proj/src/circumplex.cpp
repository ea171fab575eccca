#include "mer/circumplex.hpp"

#include <algorithm>
#include <cmath>

#include "mer/error.hpp"

namespace mer {

std::string to_string(QuadrantLabel q) {
    switch (q) {
        case QuadrantLabel::HighArousalPositiveValence: return "HighArousalPositiveValence";
        case QuadrantLabel::HighArousalNegativeValence: return "HighArousalNegativeValence";
        case QuadrantLabel::LowArousalNegativeValence: return "LowArousalNegativeValence";
        case QuadrantLabel::LowArousalPositiveValence: return "LowArousalPositiveValence";
        case QuadrantLabel::Origin: return "Origin";
        case QuadrantLabel::Axis: return "Axis";
    }
    return "Unknown";
}

EmotionPoint clamp(double valence, double arousal) {
    if (!std::isfinite(valence) || !std::isfinite(arousal)) {
        throw InvalidValue("EmotionPoint coordinates must be finite");
    }
    return {std::clamp(valence, -1.0, 1.0), std::clamp(arousal, -1.0, 1.0)};
}

QuadrantLabel quadrant(const EmotionPoint& p) {
    if (p.valence == 0.0 && p.arousal == 0.0) return QuadrantLabel::Origin;
    if (p.valence == 0.0 || p.arousal == 0.0) return QuadrantLabel::Axis;
    if (p.arousal > 0.0) {
        return p.valence > 0.0 ? QuadrantLabel::HighArousalPositiveValence
                               : QuadrantLabel::HighArousalNegativeValence;
    }
    return p.valence > 0.0 ? QuadrantLabel::LowArousalPositiveValence
                           : QuadrantLabel::LowArousalNegativeValence;
}

double intensity(const EmotionPoint& p) {
    return std::hypot(p.valence, p.arousal);
}

double distance(const EmotionPoint& a, const EmotionPoint& b) {
    return std::hypot(a.valence - b.valence, a.arousal - b.arousal);
}

}  // namespace mer
