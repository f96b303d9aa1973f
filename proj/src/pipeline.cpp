#include "idvo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace idvo {

SequenceRun optimize_sequence(const std::vector<Frame>& frames, const CameraIntrinsics& k,
                              const OptimizerConfig& config, int stride, int threads) {
  config.validate();
  const int len = config.snippet_len;
  if (int(frames.size()) < len) {
    throw LengthError("optimize_sequence: " + std::to_string(frames.size()) +
                      " frames is shorter than one snippet of " + std::to_string(len));
  }
  if (stride < 1 || stride >= len) {
    throw LengthError("optimize_sequence: stride must lie in [1, " + std::to_string(len - 1) + "]");
  }
  SequenceRun run;
  run.overlap = len - 1 - stride;
  for (int i = 0; i + len <= int(frames.size()); i += stride) run.first_index.push_back(i);
  run.snippets.resize(run.first_index.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t s = next++; s < run.first_index.size(); s = next++) {
      try {
        const auto begin = frames.begin() + run.first_index[s];
        const std::vector<Frame> window(begin, begin + len);
        run.snippets[s] = optimize_snippet(window, k, config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::clamp(threads, 1, int(run.first_index.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SnippetState> states;
  for (const SnippetResult& r : run.snippets) states.push_back(r.state);
  run.trajectory = chain_snippets(states, run.overlap);
  return run;
}

}  // namespace idvo
