"""Training, evaluation, comparison and plotting of experiment runs."""
