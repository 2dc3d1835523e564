# Logging, errors, numeric helpers and the thread pool
