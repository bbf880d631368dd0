//! Holds no code: the suite is the `acceptance` test target, which prints one
//! pass/fail line per criterion and exits non-zero if any fails.
