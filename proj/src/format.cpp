#include "coopdet/format.hpp"

#include <cmath>
#include <cstdio>

namespace coopdet {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.11e", x == 0.0 ? 0.0 : x);  // folds -0 into 0
    return buf;
}

}  // namespace coopdet
