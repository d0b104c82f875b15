#ifndef MLEMBED_KERNEL_SUPPORT_H
#define MLEMBED_KERNEL_SUPPORT_H

#include <stdint.h>

/* splitmix64; must stay in sync with mlembed.rng */
static inline uint64_t sm_next(uint64_t *state) {
    uint64_t z = (*state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/* n must be below 2^32 */
static inline uint64_t sm_below(uint64_t *state, uint64_t n) {
    return ((sm_next(state) >> 32) * n) >> 32;
}

static inline uint64_t sm_thread_seed(uint64_t seed, int tid) {
    return seed + 0x9E3779B97F4A7C15ULL * (uint64_t)(tid + 1);
}

static inline int cas_i32(int32_t *ptr, int32_t expected, int32_t desired) {
    return __atomic_compare_exchange_n(ptr, &expected, desired, 0,
                                       __ATOMIC_ACQ_REL, __ATOMIC_ACQUIRE);
}

static inline int32_t load_i32(const int32_t *ptr) {
    return __atomic_load_n(ptr, __ATOMIC_RELAXED);
}

/* pull a float row into cache ahead of use */
static inline void prefetch_row(const float *row, int64_t len) {
    for (int64_t j = 0; j < len; j += 16)
        __builtin_prefetch(row + j, 1, 3);
}

#ifdef _OPENMP
#include <omp.h>
static const int MLEMBED_HAVE_OPENMP = 1;
static inline int mlembed_max_threads(void) { return omp_get_max_threads(); }
#else
static const int MLEMBED_HAVE_OPENMP = 0;
static inline int mlembed_max_threads(void) { return 1; }
#endif

#endif
