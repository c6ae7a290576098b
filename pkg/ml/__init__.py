# Machine Learning Module
