# Score Module
