# pytest collects bqms/test from here; keep this file at the repository root
