# Assembly of the exponents c1, c2 of the small-noise density expansion
