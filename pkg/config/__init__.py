# Settings read from the environment (.env) with numeric defaults
