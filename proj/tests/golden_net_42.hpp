// Frozen first generation of the seed-42 example network (see test_bench.cpp).
#pragma once

inline const char* const kGoldenNet42Text = R"json({
  "kind": "fnn",
  "widths": [
    2,
    2,
    2,
    2
  ],
  "layers": [
    {
      "w": [
        0.34162432775212503,
        -0.4809593348155971,
        -0.3131052842872572,
        -0.22034760183590596
      ],
      "b": [
        -0.6533240010575967,
        0.5207531398986642
      ],
      "act": "tanh"
    },
    {
      "w": [
        -0.39823519414605335,
        0.4251576773299126,
        -0.2263716956785206,
        0.1675589451388348
      ],
      "b": [
        -0.4173318317016284,
        -0.009914788532423932
      ],
      "act": "tanh"
    },
    {
      "w": [
        0.01894496938591131,
        0.02830307972673832,
        0.23357067870648668,
        -0.4194060905513083
      ],
      "b": [
        -0.5606306923764955,
        -0.006365858694217547
      ],
      "act": "tanh"
    }
  ]
}
)json";
