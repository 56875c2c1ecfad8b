"""binsense - binary signal recovery from biased partial circulant/Toeplitz measurements."""
