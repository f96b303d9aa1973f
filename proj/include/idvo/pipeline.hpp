#ifndef IDVO_PIPELINE_HPP
#define IDVO_PIPELINE_HPP

#include <vector>

#include "idvo/optimizer.hpp"

namespace idvo {

struct SequenceRun {
  std::vector<int> first_index;         // first frame of each snippet
  std::vector<SnippetResult> snippets;
  std::vector<Pose6DoF> trajectory;     // chained, camera-to-world, one pose per covered frame
  int overlap = 0;                      // relative poses shared by consecutive snippets
};

// Optimizes windows of config.snippet_len frames starting every `stride` frames on up to
// `threads` workers, then chains them. Results do not depend on the thread count. Throws
// LengthError if the sequence is shorter than one snippet or stride >= snippet_len.
SequenceRun optimize_sequence(const std::vector<Frame>& frames, const CameraIntrinsics& k,
                              const OptimizerConfig& config, int stride, int threads = 1);

}  // namespace idvo

#endif  // IDVO_PIPELINE_HPP
