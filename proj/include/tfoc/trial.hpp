#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tfoc {

enum class Label : int { left = 0, right = 1 };

// One motor-imagery trial. data[ch] holds the samples of channel ch (µV).
struct TrialRecord {
  std::string subject_id;
  std::string session_id;
  std::vector<std::string> channels;
  std::vector<std::vector<double>> data;
  Label label{Label::left};
  double fs{0.0};

  std::size_t n_channels() const { return data.size(); }
  std::size_t n_samples() const { return data.empty() ? 0 : data.front().size(); }
  double duration_s() const { return fs > 0.0 ? static_cast<double>(n_samples()) / fs : 0.0; }

  // Index of a named channel, or -1.
  int channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
      if (channels[i] == name) return static_cast<int>(i);
    return -1;
  }
};

}  // namespace tfoc
