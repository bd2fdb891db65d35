#include "pupilfield/runtime.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pupilfield {

int thread_budget() {
    static const int budget = [] {
        int n = 1;
#ifdef _OPENMP
        n = omp_get_max_threads();
#endif
        if (const char* env = std::getenv("PUPILFIELD_THREADS")) {
            try {
                const int requested = std::stoi(env);
                if (requested > 0) n = requested;
            } catch (...) {
                // malformed value: keep the hardware default
            }
        }
        return n < 1 ? 1 : n;
    }();
    return budget;
}

}  // namespace pupilfield
