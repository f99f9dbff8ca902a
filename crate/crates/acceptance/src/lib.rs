//! Holds the `acceptance` test target. It lives in its own package so that
//! its long-running criteria run after the library and CLI test suites.
