#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "gpvad/postprocess.hpp"
#include "gpvad/util.hpp"

namespace gpvad {

// Static SVG of one clip's speech-probability curve: shaded ground-truth
// regions, the probability polyline, and labeled horizontal threshold lines.
inline void write_probability_svg(const std::string& path,
                                  const std::vector<float>& scores,
                                  const std::vector<SpeechSegment>& reference,
                                  double frame_hop_s, double phi_low, double phi_hi,
                                  const std::string& title) {
  require(!scores.empty(), "plot: empty score series");
  const double width = 800.0, height = 300.0;
  const double ml = 50.0, mr = 15.0, mt = 30.0, mb = 35.0;
  const double pw = width - ml - mr, ph = height - mt - mb;
  const double tmax = static_cast<double>(scores.size()) * frame_hop_s;
  auto X = [&](double t) { return ml + pw * t / tmax; };
  auto Y = [&](double p) { return mt + ph * (1.0 - p); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write svg: " + path);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << ml << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";

  for (const auto& s : reference)
    out << "<rect class=\"reference\" x=\"" << format_fixed(X(s.onset_s), 2)
        << "\" y=\"" << format_fixed(mt, 2) << "\" width=\""
        << format_fixed(X(s.offset_s) - X(s.onset_s), 2) << "\" height=\""
        << format_fixed(ph, 2) << "\" fill=\"#c8e6c9\"/>\n";

  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";

  auto threshold_line = [&](double phi, const char* name) {
    out << "<line class=\"threshold\" id=\"" << name << "\" x1=\"" << ml
        << "\" y1=\"" << format_fixed(Y(phi), 2) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << format_fixed(Y(phi), 2)
        << "\" stroke=\"#d32f2f\" stroke-dasharray=\"6 3\"/>\n";
    out << "<text x=\"" << ml + pw - 60 << "\" y=\"" << format_fixed(Y(phi) - 4, 2)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d32f2f\">" << name
        << "=" << format_fixed(phi, 2) << "</text>\n";
  };
  threshold_line(phi_low, "phi_low");
  threshold_line(phi_hi, "phi_high");

  out << "<polyline fill=\"none\" stroke=\"#1565c0\" stroke-width=\"1.5\" points=\"";
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t) out << ' ';
    out << format_fixed(X(static_cast<double>(t) * frame_hop_s), 2) << ','
        << format_fixed(Y(scores[t]), 2);
  }
  out << "\"/>\n";
  out << "<text x=\"" << ml + pw / 2 - 30 << "\" y=\"" << height - 8
      << "\" font-family=\"sans-serif\" font-size=\"12\">time (s)</text>\n";
  out << "</svg>\n";
}

// CSV twin of the plotted series: one row per frame.
inline void write_probability_csv(const std::string& path,
                                  const std::vector<float>& scores,
                                  const std::vector<SpeechSegment>& reference,
                                  double frame_hop_s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  out << "time_s,probability,reference\n";
  for (std::size_t t = 0; t < scores.size(); ++t) {
    const double time = static_cast<double>(t) * frame_hop_s;
    int ref = 0;
    for (const auto& s : reference)
      if (time >= s.onset_s && time < s.offset_s) ref = 1;
    out << format_fixed(time, 3) << ',' << format_fixed(scores[t], 6) << ',' << ref
        << '\n';
  }
}

}  // namespace gpvad
