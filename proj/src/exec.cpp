#include "rtomo/exec.hpp"

#include <omp.h>

namespace rtomo {

void set_thread_limit(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace rtomo
