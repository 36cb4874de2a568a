"""Reference per-subject accuracies for the three decoders.

These nine-subject scores come from the study this toolkit reimplements;
the underlying recordings are private, so the scores serve purely as fixture
inputs to the statistics tools (paired significance test, table summaries).
The quoted averages are stored alongside so the summary code can flag
arithmetic inconsistencies: the eegnet column mean computes to 0.2462, not
the quoted 0.2196.
"""

SUBJECT_ACCURACY = {
    "eegnet": [0.2880, 0.2480, 0.2240, 0.2160, 0.2720,
               0.2320, 0.2480, 0.2480, 0.2400],
    "deepconvnet": [0.2960, 0.2800, 0.2400, 0.2240, 0.2320,
                    0.2480, 0.2480, 0.2800, 0.2320],
    "fingernet": [0.3920, 0.2800, 0.2400, 0.2880, 0.3440,
                  0.3280, 0.2960, 0.3200, 0.2560],
}

QUOTED_MEAN = {
    "eegnet": 0.2196,
    "deepconvnet": 0.2533,
    "fingernet": 0.3049,
}

QUOTED_STD = {
    "eegnet": 0.0225,
    "deepconvnet": 0.0256,
    "fingernet": 0.0481,
}
