//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! check and exits nonzero if any check fails.
