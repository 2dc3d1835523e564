# Vector field systems: builtin models and polynomial documents
